from fractions import Fraction

import pytest
import sympy
from hypothesis import given, strategies as st

from polymart.algebra import (
    MS, MT, MU, S, T, RationalFunction, RFMatrix, TimePolynomial,
    as_rational, determinant, leading_principal_minors, solve_linear,
)
from polymart.errors import DegenerateAtPoint, DivisionByZeroFunction, SingularSystem

small = st.fractions(min_value=-20, max_value=20, max_denominator=12)
polys = st.lists(small, max_size=5).map(TimePolynomial)


def test_time_polynomial_basics():
    t = TimePolynomial.t()
    p = t * t - 1
    assert p.degree == 2
    assert str(p) == "-1 + t^2"
    assert TimePolynomial().degree == -1
    assert str(t + t) == "2*t"
    q, r = divmod(p, t - 1)
    assert q == t + 1 and r.is_zero()
    assert p.gcd(t * t - 2 * t + 1) == t - 1
    assert p(Fraction(3)) == 8
    assert p.compose(t + 1) == t * t + 2 * t


def test_rational_function_canonical():
    assert T + T == 2 * T
    f = (T * T - 1) / (T - 1)
    assert f == T + 1 and f.is_polynomial()
    assert str(f) == "1 + t"
    assert str(RationalFunction(Fraction(-4, 9))) == "-4/9"
    g = (T + S) / (T - S)
    assert g.subs(t=2, s=1) == 3
    assert g.variables == frozenset({"t", "s"})
    with pytest.raises(DegenerateAtPoint):
        g.subs(t=1, s=1)
    with pytest.raises(DivisionByZeroFunction):
        T / (T - T)


def test_as_rational_rejects_floats():
    assert as_rational("3/4") == Fraction(3, 4)
    with pytest.raises(TypeError):
        as_rational(0.5)


def test_solve_2x2_symbolic():
    A = RFMatrix([[1, 1], [MS, MU]])
    a, b = solve_linear(A, [1, MT])
    assert a == (MT - MU) / (MS - MU)
    assert b == (MS - MT) / (MS - MU)


def test_singular_system():
    with pytest.raises(SingularSystem):
        solve_linear(RFMatrix([[1, 2], [2, 4]]), [1, 1])
    with pytest.raises(DegenerateAtPoint):
        solve_linear(RFMatrix([[1, 1], [MS, MU]]), [1, MT], at={"m_s": 2, "m_u": 2})


def test_permutation_determinant():
    assert determinant(RFMatrix([[0, 1], [1, 0]])) == -1


def test_leading_minors_stop_at_zero():
    assert leading_principal_minors([[1, 1], [1, 1]]) == [1, 0]
    assert leading_principal_minors([[0, 1], [1, 0]]) == [0]


@given(polys, polys, polys)
def test_ring_axioms(p, q, r):
    assert p * (q + r) == p * q + p * r
    assert (p + q) - q == p
    assert p * q == q * p


@given(polys, polys.filter(lambda p: not p.is_zero()))
def test_division_identity(p, d):
    q, r = divmod(p, d)
    assert q * d + r == p
    assert r.degree < d.degree


@given(st.lists(st.lists(small, min_size=3, max_size=3), min_size=3, max_size=3))
def test_determinant_matches_sympy(rows):
    oracle = sympy.Matrix([[sympy.Rational(x.numerator, x.denominator) for x in r] for r in rows]).det()
    assert determinant(RFMatrix(rows)) == Fraction(int(oracle.p), int(oracle.q))


@given(st.lists(st.lists(small, min_size=3, max_size=3), min_size=3, max_size=3),
       st.lists(small, min_size=3, max_size=3))
def test_solution_satisfies_system(rows, b):
    A = RFMatrix(rows)
    if determinant(A).is_zero():
        with pytest.raises(SingularSystem):
            solve_linear(A, b)
        return
    x = solve_linear(A, b)
    assert list(A @ x) == [RationalFunction(v) for v in b]


def test_symbolic_determinant_matches_sympy():
    t, s = sympy.symbols("t s")
    rows = [[T, 1, S], [T * S, T - 1, 2], [1, S * S, T]]
    ours = determinant(RFMatrix(rows))
    oracle = sympy.Matrix([[t, 1, s], [t * s, t - 1, 2], [1, s * s, t]]).det()
    assert ours.subs(t=3, s=5) == oracle.subs({t: 3, s: 5})
    assert ours.subs(t=Fraction(1, 2), s=-2) == Fraction(str(oracle.subs({t: sympy.Rational(1, 2), s: -2})))
