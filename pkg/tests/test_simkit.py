from fractions import Fraction

import numpy as np
import pytest

from polymart import build_family, builtin
from polymart.algebra import T
from polymart.errors import (
    DegenerateVariance, GridMismatch, InsufficientMoments, InvalidGrid, InvalidParameter,
    TimeOrderViolation,
)
from polymart.martingale import SpaceTimePolynomial as P, X, family_from_members
from polymart.simkit import mc_martingale_test, mc_moment_check, sample_paths


def test_shapes_and_start():
    batch = sample_paths("wiener", [Fraction(1, 2), 1, 2], 1000, seed=1)
    assert batch.paths.shape == (1000, 3)
    assert batch.grid == (Fraction(1, 2), 1, 2)
    assert batch.column(1).shape == (1000,)


def test_deterministic_across_workers():
    a = sample_paths("poisson", [1, 2, 3], 20000, seed=7, workers=1)
    b = sample_paths("poisson", [1, 2, 3], 20000, seed=7, workers=8)
    assert np.array_equal(a.paths, b.paths)
    c = sample_paths("poisson", [1, 2, 3], 20000, seed=8)
    assert not np.array_equal(a.paths, c.paths)


def test_prefix_stable_in_chunk_size():
    a = sample_paths("wiener", [1], 100, seed=3, chunk=50)
    b = sample_paths("wiener", [1], 50, seed=3, chunk=50)
    assert np.array_equal(a.paths[:50], b.paths)


@pytest.mark.parametrize("process", ["poisson", "poisson:3", "gamma"])
def test_monotone_paths(process):
    paths = sample_paths(process, [1, 2, 3, 5], 2000, seed=0).paths
    assert (np.diff(paths, axis=1) >= 0).all() and (paths >= 0).all()


def test_poisson_integer_valued():
    paths = sample_paths("poisson:2", [1, 2], 500, seed=0).paths
    assert np.array_equal(paths, np.round(paths))


def test_bernoulli_jumps_unit_steps():
    paths = sample_paths("bernoulli-jumps", [1, 2], 500, seed=0).paths
    assert np.array_equal(paths, np.round(paths))


def test_model_object_accepted():
    batch = sample_paths(builtin("wiener", 4), [1], 10, seed=0)
    assert batch.process == "wiener"


@pytest.mark.parametrize("grid", [[], [2, 1], [1, 1], [-1, 1]])
def test_invalid_grid(grid):
    with pytest.raises(InvalidGrid):
        sample_paths("wiener", grid, 10, seed=0)


def test_invalid_parameters():
    with pytest.raises(InvalidParameter):
        sample_paths("cauchy", [1], 10, seed=0)
    with pytest.raises(InvalidParameter):
        sample_paths("poisson:-1", [1], 10, seed=0)
    with pytest.raises(InvalidParameter):
        sample_paths("wiener", [1], 0, seed=0)


@pytest.mark.parametrize("name", ["wiener", "poisson", "gamma", "bernoulli-jumps"])
def test_moments_match_exact(name):
    model = builtin(name, 8, 1) if name in ("poisson", "bernoulli-jumps") else builtin(name, 8)
    batch = sample_paths(name, [1, 2], 100000, seed=11)
    for n in range(1, 5):
        assert mc_moment_check(model, batch, n, 2).verdict == "pass"


def test_moment_check_errors():
    batch = sample_paths("wiener", [1], 100, seed=0)
    with pytest.raises(DegenerateVariance):
        mc_moment_check(builtin("wiener", 4), batch, 0, 1)
    with pytest.raises(InsufficientMoments):
        mc_moment_check(builtin("wiener", 4), batch, 3, 1)
    with pytest.raises(GridMismatch):
        mc_moment_check(builtin("wiener", 4), batch, 1, 2)


def test_martingale_passes(wiener6, poisson6):
    for fam, name in ((wiener6, "wiener"), (poisson6, "poisson")):
        batch = sample_paths(name, [1, 2], 100000, seed=42)
        results = mc_martingale_test(fam, batch, 2, 1, 2)
        assert len(results) == 3
        assert all(r.verdict == "pass" for r in results)


def test_corrupted_family_detected():
    fam = family_from_members(builtin("wiener", 8), [P([1]), X, P([-2 * T, 0, 1])], certify=False)
    batch = sample_paths("wiener", [1, 2], 100000, seed=42)
    r = mc_martingale_test(fam, batch, 2, 1, 2, K=0)[0]
    assert r.verdict == "fail"
    # exact value of the statistic is -(2*2 - 2*1) + (2 - 1) = -1
    assert abs(r.estimate + 1) < 5 * r.se


def test_order_zero_exact(wiener6):
    batch = sample_paths("wiener", [1, 2], 10, seed=0)
    r = mc_martingale_test(wiener6, batch, 0, 1, 2)[0]
    assert (r.estimate, r.se, r.z, r.verdict) == (0.0, 0.0, 0.0, "pass")


def test_martingale_errors(wiener6):
    batch = sample_paths("wiener", [1, 2], 10, seed=0)
    with pytest.raises(TimeOrderViolation):
        mc_martingale_test(wiener6, batch, 1, 2, 1)
    with pytest.raises(InsufficientMoments):
        mc_martingale_test(build_family(builtin("wiener", 6), 3), batch, 3, 1, 2, K=1)


def test_calibration(wiener6):
    rejections = total = 0
    for seed in range(100):
        batch = sample_paths("wiener", [1, 2], 2000, seed=seed)
        for r in mc_martingale_test(wiener6, batch, 1, 1, 2, K=1):
            total += 1
            rejections += r.verdict == "fail"
    assert rejections / total <= 0.02


def test_json_keys(wiener6):
    batch = sample_paths("wiener", [1, 2], 1000, seed=5)
    r = mc_martingale_test(wiener6, batch, 1, 1, 2, K=0)[0]
    assert set(r.to_dict()) == {"stat", "estimate", "se", "z", "n_paths", "seed", "verdict"}
    assert r.to_dict()["seed"] == 5 and r.n_paths == 1000
