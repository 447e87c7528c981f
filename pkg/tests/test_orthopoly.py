from fractions import Fraction

import pytest
import sympy
from hypothesis import given, strategies as st

from polymart import builtin
from polymart.algebra import T
from polymart.checks import constant_gram_schmidt
from polymart.errors import InsufficientMoments, MomentInfeasible, TimeOrderViolation
from polymart.orthopoly import (
    _apply, _mul, compare_families, marginal_orthogonal, orthogonal_from_moments,
    transitional_moments, transitional_orthogonal,
)

x = sympy.Symbol("x")


def coeffs(expr):
    return [Fraction(str(c)) for c in reversed(sympy.Poly(sympy.expand(expr), x).all_coeffs())]


def test_hermite_against_sympy():
    system = marginal_orthogonal(builtin("wiener", 12), 1, 6)
    for k in range(7):
        assert list(system.polys[k]) == coeffs(sympy.hermite_prob(k, x))
    assert system.norms == tuple(Fraction(sympy.factorial(k)) for k in range(7))
    assert system.b == (0,) * 6
    assert system.c[1:] == tuple(range(1, 7))


def test_hermite_display():
    system = marginal_orthogonal(builtin("wiener", 8), 1, 4)
    assert str(system.poly(4)) == "x^4 - 6*x^2 + 3"
    assert system.to_dict()["norms"] == ["1", "1", "2", "6", "24"]


def test_wiener_scaled_time():
    system = marginal_orthogonal(builtin("wiener", 8), Fraction(1, 2), 4)
    assert system.c[1:] == tuple(Fraction(k, 2) for k in range(1, 5))


@pytest.mark.parametrize("t", [Fraction(1), Fraction(3, 2), Fraction(4)])
def test_charlier_recurrence(t):
    system = marginal_orthogonal(builtin("poisson", 12, 1), t, 5)
    assert system.b == tuple(k + t for k in range(5))
    assert system.c[1:] == tuple(k * t for k in range(1, 6))


def test_charlier_example():
    system = marginal_orthogonal(builtin("poisson", 4, 1), 1, 2)
    assert str(system.poly(2)) == "x^2 - 3*x + 1"


@pytest.mark.parametrize("t", [Fraction(1), Fraction(5, 2)])
def test_laguerre_against_sympy(t):
    system = marginal_orthogonal(builtin("gamma", 10), t, 5)
    for k in range(6):
        monic = sympy.assoc_laguerre(k, sympy.Rational(str(t)) - 1, x) * (-1) ** k * sympy.factorial(k)
        assert list(system.polys[k]) == coeffs(monic)
    assert system.b == tuple(2 * k + t for k in range(5))


def test_insufficient_order():
    with pytest.raises(InsufficientMoments):
        marginal_orthogonal(builtin("wiener", 6), 1, 4)
    with pytest.raises(InsufficientMoments):
        orthogonal_from_moments([1, 0, 1], 2)


def test_infeasible_moments():
    with pytest.raises(MomentInfeasible) as info:
        orthogonal_from_moments([1, 0, 0, 0, 0], 2, where="point mass")
    assert info.value.minor == 2
    with pytest.raises(MomentInfeasible) as info:
        orthogonal_from_moments([1, 0, -1], 1)
    assert info.value.minor == 2


atoms = st.lists(st.integers(-6, 6), min_size=2, max_size=6, unique=True)


@given(atoms, st.data())
def test_discrete_measure_orthogonality(points, data):
    weights = [Fraction(w) for w in data.draw(st.lists(st.integers(1, 9), min_size=len(points), max_size=len(points)))]
    K = len(points) - 1
    nu = [sum(w * Fraction(p) ** k for p, w in zip(points, weights)) for k in range(2 * K + 1)]
    system = orthogonal_from_moments(nu, K)
    assert all(n > 0 for n in system.norms)
    for i in range(K + 1):
        for j in range(i + 1):
            inner = _apply(nu, _mul(system.polys[i], system.polys[j]))
            assert inner == (system.norms[i] if i == j else 0)


@given(atoms)
def test_gram_schmidt_idempotent(points):
    K = len(points) - 1
    nu = [sum(Fraction(p) ** k for p in points) for k in range(2 * K + 1)]
    first = orthogonal_from_moments(nu, K)
    again = orthogonal_from_moments(nu, K)
    assert compare_families(first.polys, again.polys).kind == "equal"


def test_transitional_wiener(wiener6):
    system = transitional_orthogonal(wiener6, 1, 2, 3, 3)
    assert str(system.poly(3)) == "x^3 - 6*x^2 + 6*x + 4"
    assert system.norms[1] == 2


def test_transitional_poisson(poisson6):
    seq = transitional_moments(poisson6, 1, 3, 2, 3)
    assert seq.moments[1] == 4
    assert seq.moments[2] == 17
    system = transitional_orthogonal(poisson6, 1, 3, 2, 2)
    # shifted Charlier: p(x) = c(x - 3) with c the unit-rate Charlier
    assert list(system.polys[2]) == coeffs((x - 3) ** 2 - 3 * (x - 3) + 1)


def test_transitional_errors(wiener6):
    with pytest.raises(TimeOrderViolation):
        transitional_moments(wiener6, 2, 0, 1, 2)
    with pytest.raises(InsufficientMoments):
        transitional_moments(wiener6, 1, 0, 2, 4)


def test_compare_families(poisson6, wiener6):
    L, charlier = constant_gram_schmidt(poisson6)
    result = compare_families(charlier.members, poisson6.members)
    assert result.kind == "constant-recombination"
    assert [list(r) for r in result.L] == [list(r) for r in L]
    assert compare_families(wiener6.members, wiener6.members).kind == "equal"
    shifted = list(wiener6.members)
    shifted[2] = shifted[2] - wiener6[1] * T
    verdict = compare_families(shifted, wiener6.members)
    assert verdict.kind == "unrelated" and "depends on time" in verdict.note
    assert compare_families(wiener6.members[:3], wiener6.members).kind == "unrelated"
