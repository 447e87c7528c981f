"""Monte Carlo paths for the builtin processes and z-tests of exact claims.

Paths are generated in fixed-size chunks; chunk ``c`` draws from its own
Philox stream keyed by ``SeedSequence(seed, spawn_key=(c,))``.  The batch is
therefore a pure function of (process, grid, n_paths, seed) whatever the
number of worker threads.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .algebra import as_rational
from .errors import (
    DegenerateVariance,
    GridMismatch,
    InsufficientMoments,
    InvalidGrid,
    InvalidParameter,
    TimeOrderViolation,
)
from .martingale import MartingaleFamily, SpaceTimePolynomial
from .model import MomentModel

CHUNK = 8192
DEFAULT_PATHS = 100_000
DEFAULT_ZMAX = 4.0


@dataclass(frozen=True, eq=False)
class PathBatch:
    process: str
    grid: tuple[Fraction, ...]
    paths: np.ndarray
    seed: int

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]

    def column(self, tau) -> np.ndarray:
        tau = as_rational(tau)
        try:
            return self.paths[:, self.grid.index(tau)]
        except ValueError:
            raise GridMismatch(f"time {tau} is not on the grid {[str(g) for g in self.grid]}") from None


def _parse_process(process) -> tuple[str, float]:
    label = process.name if isinstance(process, MomentModel) else str(process)
    name, _, param = label.partition(":")
    if name not in ("wiener", "poisson", "gamma", "bernoulli-jumps"):
        raise InvalidParameter(f"cannot simulate {label!r}")
    lam = float(as_rational(param)) if param else 1.0
    if lam <= 0:
        raise InvalidParameter("intensity must be positive")
    return name, lam


def _increments(rng: np.random.Generator, name: str, lam: float, dts: np.ndarray, n: int) -> np.ndarray:
    shape = (n, len(dts))
    if name == "wiener":
        return rng.standard_normal(shape) * np.sqrt(dts)
    if name == "poisson":
        return rng.poisson(lam * dts, shape).astype(float)
    if name == "gamma":
        return rng.gamma(dts, 1.0, shape)
    jumps = rng.poisson(lam * dts, shape)
    return (2 * rng.binomial(jumps, 0.5) - jumps).astype(float)


def sample_paths(process, grid: Sequence, n_paths: int, seed: int, *, workers: int = 1,
                 chunk: int = CHUNK) -> PathBatch:
    name, lam = _parse_process(process)
    label = process.name if isinstance(process, MomentModel) else str(process)
    times = tuple(as_rational(g) for g in grid)
    if not times or any(b <= a for a, b in zip(times, times[1:])) or times[0] < 0:
        raise InvalidGrid("grid must be non-empty, non-negative and strictly increasing")
    if n_paths < 1:
        raise InvalidParameter("n_paths must be at least 1")
    dts = np.diff(np.array([0.0] + [float(x) for x in times]))
    n_chunks = -(-n_paths // chunk)

    def one(c: int) -> np.ndarray:
        ss = np.random.SeedSequence(seed, spawn_key=(c,))
        rng = np.random.Generator(np.random.Philox(ss))
        size = min(chunk, n_paths - c * chunk)
        return np.cumsum(_increments(rng, name, lam, dts, size), axis=1)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, range(n_chunks)))
    else:
        parts = [one(c) for c in range(n_chunks)]
    return PathBatch(label, times, np.concatenate(parts, axis=0), seed)


@dataclass(frozen=True)
class MCTestResult:
    stat: str
    estimate: float
    se: float
    z: float
    n_paths: int
    seed: int
    z_max: float = DEFAULT_ZMAX

    @property
    def verdict(self) -> str:
        return "pass" if abs(self.z) < self.z_max else "fail"

    def to_dict(self) -> dict:
        return {"stat": self.stat, "estimate": self.estimate, "se": self.se, "z": self.z,
                "n_paths": self.n_paths, "seed": self.seed, "verdict": self.verdict}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _float_coeffs(p: SpaceTimePolynomial) -> np.ndarray:
    return np.array([float(c.constant()) for c in p.coeffs] or [0.0])


def _member(fam: MartingaleFamily, n: int, tau: Fraction) -> np.ndarray:
    return _float_coeffs(fam.members_at(tau)[n])


def _z(samples: np.ndarray, target: float) -> tuple[float, float, float]:
    mean = float(np.mean(samples))
    se = float(np.std(samples, ddof=1) / math.sqrt(len(samples))) if len(samples) > 1 else 0.0
    if se == 0.0:
        raise DegenerateVariance("all samples are equal")
    return mean, se, (mean - target) / se


def mc_martingale_test(fam: MartingaleFamily, batch: PathBatch, n: int, s, t, K: int = 2,
                       z_max: float = DEFAULT_ZMAX) -> list[MCTestResult]:
    """z-tests of E[(M_n(X_t, t) - M_n(X_s, s)) M_k(X_s, s)] = 0 for k = 0..K."""
    s, t = as_rational(s), as_rational(t)
    if s >= t:
        raise TimeOrderViolation("need s < t")
    if 2 * (n + K) > fam.capacity or max(n, K) > fam.N:
        raise InsufficientMoments(f"variance of the order-{n + K} statistic needs moments to order {2 * (n + K)}")
    xs, xt = batch.column(s), batch.column(t)
    poly = np.polynomial.polynomial.polyval
    defect = poly(xt, _member(fam, n, t)) - poly(xs, _member(fam, n, s))
    out = []
    for k in range(K + 1):
        stat = f"E[(M_{n}(t)-M_{n}(s)) M_{k}(s)] at s={s}, t={t}"
        if n == 0:
            out.append(MCTestResult(stat, 0.0, 0.0, 0.0, batch.n_paths, batch.seed, z_max))
            continue
        mean, se, z = _z(defect * poly(xs, _member(fam, k, s)), 0.0)
        out.append(MCTestResult(stat, mean, se, z, batch.n_paths, batch.seed, z_max))
    return out


def mc_moment_check(model: MomentModel, batch: PathBatch, n: int, t, z_max: float = DEFAULT_ZMAX) -> MCTestResult:
    """Sample mean of X_t^n against the exact g_n(t)."""
    t = as_rational(t)
    if 2 * n > model.max_order:
        raise InsufficientMoments(f"variance of X^{n} needs moments to order {2 * n}")
    x = batch.column(t)
    exact = float(model.g(n).evaluate(t=t))
    mean, se, z = _z(x ** n, exact)
    return MCTestResult(f"E X_t^{n} at t={t} (exact {exact:g})", mean, se, z, batch.n_paths, batch.seed, z_max)
