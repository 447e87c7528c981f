from fractions import Fraction
from math import comb, prod

import pytest
from hypothesis import given, strategies as st

from polymart import build_family, builtin, make_model
from polymart.algebra import S, T, U, RationalFunction
from polymart.errors import (
    CertificationFailed, InsufficientMoments, OrderOutOfRange, TimeOrderViolation,
)
from polymart.martingale import (
    SpaceTimePolynomial as P, X, conditional_expectation, cross_moment, expectation,
    family_from_json, family_from_members, from_martingale_basis, iterated_conditional,
    joint_moment, linearize_product, recombine, second_moment, structural_matrix,
    to_martingale_basis,
)

GRID = [Fraction(1, 2), Fraction(1), Fraction(2), Fraction(3)]


def double_factorial(n):
    return prod(range(n, 0, -2)) if n > 0 else 1


def gaussian_increment(k):
    return RationalFunction(0) if k % 2 else (T - S) ** (k // 2) * double_factorial(k - 1)


def poisson_increment(k):
    # Touchard polynomial in t - s via the Bell recursion on exponents
    from sympy.functions.combinatorial.numbers import stirling
    return sum(((T - S) ** j * int(stirling(k, j)) for j in range(k + 1)), RationalFunction(0))


def gamma_increment(k):
    return prod((T - S + i for i in range(k)), start=RationalFunction(1))


def transition_by_oracle(p: P, increment) -> P:
    """E p(x + G) with G independent, given its moment function."""
    out = P()
    for k, c in enumerate(p.coeffs):
        for j in range(k + 1):
            out = out + P.monomial(j, c * comb(k, j) * increment(k - j))
    return out


def test_examples():
    w = build_family(builtin("wiener", 3))
    assert [str(m) for m in w.members] == ["1", "x", "x^2 - t", "x^3 - 3*t*x"]
    p = build_family(builtin("poisson", 2, 1))
    assert p[1] == X - T
    assert p[2] == X * X - X * (2 * T) - T + T * T


def test_degenerate_model_gives_monomials():
    m = make_model("zero", [1, 0, 0, 0, 0], validate=False)
    fam = build_family(m)
    assert all(fam[n] == P.monomial(n) for n in range(5))


@pytest.mark.parametrize("name,lam,increment", [
    ("wiener", None, gaussian_increment),
    ("poisson", 1, poisson_increment),
    ("gamma", None, gamma_increment),
])
def test_martingale_property_by_increment_oracle(name, lam, increment):
    fam = build_family(builtin(name, 8, lam))
    assert fam.is_certified and fam.canonical
    for m in fam.members:
        assert transition_by_oracle(m, increment) == m.at_time(S)


def test_hermite_recurrence():
    fam = build_family(builtin("wiener", 8))
    for n in range(1, 8):
        assert fam[n + 1] == X * fam[n] - fam[n - 1] * (n * T)


def test_structural_matrix_examples():
    assert structural_matrix(builtin("wiener", 4), 2).entries == (
        (1, 0, 0), (0, 1, 0), (T, 0, 1))
    assert structural_matrix(builtin("poisson", 4, 1), 2).entries == (
        (1, 0, 0), (T, 1, 0), (T + T * T, 2 * T, 1))
    with pytest.raises(OrderOutOfRange):
        structural_matrix(builtin("wiener", 4), 5)


def test_structural_matrix_all_orders(gamma6):
    for n in range(7):
        V = structural_matrix(gamma6.model, n)
        assert V.is_lower_triangular() and all(V[i, i] == 1 for i in range(n + 1))


def test_basis_examples(wiener6):
    assert to_martingale_basis(X * X, wiener6) == [T, 0, 1]
    p = build_family(builtin("poisson", 4, 1))
    assert to_martingale_basis(X * X, p) == [T + T * T, 2 * T, 1]
    assert to_martingale_basis(wiener6[4], wiener6) == [0, 0, 0, 0, 1]
    with pytest.raises(OrderOutOfRange):
        to_martingale_basis(P.monomial(7), wiener6)


coeff = st.builds(lambda a, b: RationalFunction(a) + T * b,
                  st.fractions(min_value=-5, max_value=5, max_denominator=6),
                  st.fractions(min_value=-5, max_value=5, max_denominator=6))


@given(st.lists(coeff, max_size=7))
def test_basis_round_trip(poisson6, coeffs):
    p = P(coeffs)
    assert from_martingale_basis(to_martingale_basis(p, poisson6), poisson6) == p


def test_conditional_expectation_examples(wiener6, poisson6):
    assert conditional_expectation(X * X, wiener6, S) == X * X + (T - S)
    assert conditional_expectation(X, poisson6, S) == X + (T - S)
    for n in range(7):
        assert conditional_expectation(wiener6[n], wiener6, S) == wiener6[n].at_time(S)
    assert conditional_expectation(X * X, wiener6, 1, 3) == X * X + 2
    with pytest.raises(TimeOrderViolation):
        conditional_expectation(X, wiener6, 2, 1)


@given(st.lists(coeff, max_size=5), st.lists(coeff, max_size=5))
def test_conditional_expectation_linear(gamma6, a, b):
    pa, pb = P(a), P(b)
    lhs = conditional_expectation(pa + pb * 3, gamma6, S)
    assert lhs == conditional_expectation(pa, gamma6, S) + conditional_expectation(pb, gamma6, S) * 3


def test_linearization(wiener6):
    assert linearize_product(wiener6, 1, 1).delta == (T, 0, 1)
    assert linearize_product(wiener6, 1, 2).delta == (0, 2 * T, 0, 1)
    assert linearize_product(wiener6, 0, 3).delta == (0, 0, 0, 1)
    with pytest.raises(OrderOutOfRange):
        linearize_product(wiener6, 3, 4)


@pytest.mark.parametrize("fixture", ["wiener6", "poisson6", "gamma6"])
def test_linearization_reconstructs(fixture, request):
    fam = request.getfixturevalue(fixture)
    for i in range(4):
        for j in range(i, 7 - i):
            lin = linearize_product(fam, i, j)
            assert lin.delta[-1] == 1
            assert from_martingale_basis(lin.delta, fam) == fam[i] * fam[j]


def test_moments(wiener6, poisson6, gamma6):
    assert second_moment(wiener6, 0) == 1
    assert second_moment(wiener6, 1) == T
    assert second_moment(wiener6, 2) == 2 * T * T
    assert cross_moment(wiener6, 1, 2) == 0
    assert cross_moment(poisson6, 1, 2) == T
    assert cross_moment(gamma6, 1, 2) == 2 * T
    small = build_family(builtin("wiener", 4))
    with pytest.raises(InsufficientMoments):
        second_moment(small, 3)


@pytest.mark.parametrize("fixture", ["wiener6", "poisson6", "gamma6"])
def test_moment_functional_invariants(fixture, request):
    fam = request.getfixturevalue(fixture)
    assert expectation(fam.model, fam[0]) == 1
    for n in range(1, 7):
        assert expectation(fam.model, fam[n]).is_zero()
        mn = second_moment(fam, n)
        assert mn.subs(t=0) == 0
        values = [mn.evaluate(t=g) for g in GRID]
        assert values == sorted(values)
        for m in range(7):
            assert cross_moment(fam, n, m) == cross_moment(fam, m, n)


def test_iterated_conditional_examples(wiener6):
    assert iterated_conditional(wiener6, [U], [2], S).phi == (0, 0, 1)
    phi = iterated_conditional(wiener6, [2, 3], [1, 1], 1).phi
    assert phi == (2, 0, 1)
    with pytest.raises(InsufficientMoments):
        iterated_conditional(wiener6, [2, 3], [4, 3], 1)
    with pytest.raises(TimeOrderViolation):
        iterated_conditional(wiener6, [3, 2], [1, 1], 1)


def test_iterated_conditional_single_factor(poisson6):
    phi = iterated_conditional(poisson6, [3], [2], 1).phi
    assert from_martingale_basis(phi, poisson6, 1) == conditional_expectation(poisson6[2], poisson6, 1, 3)


def test_tower_property(gamma6):
    # conditioning on F_1 and then on F_{1/2} equals conditioning on F_{1/2}
    direct = iterated_conditional(gamma6, [2, 3], [2, 1], Fraction(1, 2)).phi
    via = iterated_conditional(gamma6, [2, 3], [2, 1], 1).phi
    then = conditional_expectation(from_martingale_basis(via, gamma6, 1), gamma6, Fraction(1, 2), 1)
    assert then == from_martingale_basis(direct, gamma6, Fraction(1, 2))


def test_joint_moment_isserlis(wiener6):
    times = [1, 2, 5, 7]
    a, b, c, d = times
    expected = min(a, b) * min(c, d) + min(a, c) * min(b, d) + min(a, d) * min(b, c)
    assert joint_moment(wiener6, [(X, tau) for tau in times]) == expected
    assert joint_moment(wiener6, [(X, S), (X, U)]) == S


def test_user_family_certification():
    w = builtin("wiener", 4)
    bad = [P([1]), X, P([-2 * T, 0, 1])]
    with pytest.raises(CertificationFailed) as info:
        family_from_members(w, bad)
    assert info.value.n == 2
    flagged = family_from_members(w, bad, strict=False)
    assert flagged.certified == (True, True, False)
    assert not family_from_members(w, bad, certify=False).is_certified


def test_user_family_normalized_to_monic():
    fam = family_from_members(builtin("wiener", 4), [P([1]), X * 2, P([-3 * T, 0, 3])])
    assert fam[1] == X and fam[2] == X * X - T
    assert fam.is_certified and not fam.canonical


def test_recombination_keeps_martingales(poisson6):
    new = recombine(poisson6, [[1], [0, 1], [0, -1, 1]])
    assert new.is_certified
    assert new[2] == poisson6[2] - poisson6[1]


@pytest.mark.parametrize("fixture", ["wiener6", "poisson6"])
def test_json_round_trip(fixture, request):
    fam = request.getfixturevalue(fixture)
    text = fam.to_json()
    back = family_from_json(text)
    assert back.members == fam.members
    assert back.to_json() == text


def test_json_rational_coefficients():
    m = make_model("rational", [1, T / (T + 1), T], validate=False)
    fam = family_from_members(m, [P([1]), X - T / (T + 1)], certify=False)
    assert family_from_json(fam.to_json()).to_json() == fam.to_json()
    assert '"den"' in fam.to_json()
