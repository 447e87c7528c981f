"""Monic orthogonal polynomials recovered from moment sequences."""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .algebra import RFMatrix, as_rational, leading_principal_minors, solve_linear
from .errors import InsufficientMoments, MomentInfeasible
from .martingale import MartingaleFamily, SpaceTimePolynomial, _check_order, conditional_expectation
from .model import MomentModel


def _apply(moments: Sequence[Fraction], p: Sequence[Fraction]) -> Fraction:
    return sum((c * moments[k] for k, c in enumerate(p)), Fraction(0))


def _mul(p: Sequence[Fraction], q: Sequence[Fraction]) -> list[Fraction]:
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] += a * b
    return out


def _poly_str(p: Sequence[Fraction]) -> str:
    return str(SpaceTimePolynomial(p))


@dataclass(frozen=True)
class OrthogonalSystem:
    polys: tuple[tuple[Fraction, ...], ...]
    norms: tuple[Fraction, ...]
    source: str
    # x p_k = p_{k+1} + b_k p_k + c_k p_{k-1}, for k < K
    b: tuple[Fraction, ...]
    c: tuple[Fraction, ...]

    @property
    def K(self) -> int:
        return len(self.polys) - 1

    def poly(self, k: int) -> SpaceTimePolynomial:
        return SpaceTimePolynomial(self.polys[k])

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "polynomials": [[str(c) for c in p] for p in self.polys],
            "display": [_poly_str(p) for p in self.polys],
            "norms": [str(n) for n in self.norms],
            "recurrence": {"b": [str(x) for x in self.b], "c": [str(x) for x in self.c]},
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def orthogonal_from_moments(moments: Sequence, K: int, source: str = "moments", where=None) -> OrthogonalSystem:
    """Monic orthogonal p_0..p_K from nu_0..nu_{2K} via Hankel determinants.

    p_k solves H_k c = -(nu_k, ..., nu_{2k-1}) with H_k the k x k Hankel
    matrix; ||p_k||^2 = D_{k+1}/D_k where D_j are the leading Hankel minors.
    """
    nu = [as_rational(m) for m in moments]
    if len(nu) < 2 * K + 1:
        raise InsufficientMoments(f"{2 * K + 1} moments needed, {len(nu)} given")
    hankel = [[nu[i + j] for j in range(K + 1)] for i in range(K + 1)]
    minors = leading_principal_minors(hankel)
    for j, d in enumerate(minors, start=1):
        if d <= 0:
            raise MomentInfeasible(where, j, d)
    if len(minors) < K + 1:
        raise MomentInfeasible(where, len(minors) + 1, Fraction(0))
    D = [Fraction(1)] + list(minors)
    polys = [(Fraction(1),)]
    for k in range(1, K + 1):
        H = RFMatrix([[nu[i + j] for j in range(k)] for i in range(k)])
        sol = solve_linear(H, [-nu[k + i] for i in range(k)])
        polys.append(tuple(x.constant() for x in sol) + (Fraction(1),))
    norms = tuple(D[k + 1] / D[k] for k in range(K + 1))
    # b_K would need nu_{2K+1}
    b = tuple(_apply(nu, _mul(_mul((0, 1), p), p)) / norms[k] for k, p in enumerate(polys[:-1]))
    c = tuple(Fraction(0) if k == 0 else norms[k] / norms[k - 1] for k in range(K + 1))
    return OrthogonalSystem(tuple(polys), norms, source, b, c)


def marginal_orthogonal(model: MomentModel, t, K: int) -> OrthogonalSystem:
    t = as_rational(t)
    if 2 * K > model.max_order:
        raise InsufficientMoments(f"K = {K} needs moments to order {2 * K}")
    return orthogonal_from_moments(model.moments_at(t)[: 2 * K + 1], K, f"marginal at t={t}", where=t)


@dataclass(frozen=True)
class TransitionalMomentSequence:
    s: Fraction
    y: Fraction
    t: Fraction
    moments: tuple[Fraction, ...]


def transitional_moments(fam: MartingaleFamily, s, y, t, K: int) -> TransitionalMomentSequence:
    """nu_k = E(X_t^k | X_s = y) for k = 0..2K."""
    s, y, t = as_rational(s), as_rational(y), as_rational(t)
    _check_order(s, t)
    if 2 * K > fam.N:
        raise InsufficientMoments(f"K = {K} needs family order {2 * K}")
    nu = tuple(
        conditional_expectation(SpaceTimePolynomial.monomial(k), fam, s, t)(y).constant()
        for k in range(2 * K + 1)
    )
    return TransitionalMomentSequence(s, y, t, nu)


def transitional_orthogonal(fam: MartingaleFamily, s, y, t, K: int) -> OrthogonalSystem:
    """Orthogonal system for the law of X_t given X_s = y.

    The graded sequence 1, M_n(x, t) - M_n(y, s) spans the same flag as the
    monomials, so monic Gram-Schmidt on it yields the Hankel system; each
    p_n is checked to have transitional mean zero along the way.
    """
    seq = transitional_moments(fam, s, y, t, K)
    for n in range(1, min(K, fam.N) + 1):
        p = fam.members_at(seq.t)[n] - fam.members_at(seq.s)[n](seq.y)
        mean = _apply(seq.moments, [c.constant() for c in p.coeffs])
        if mean != 0:
            raise AssertionError(f"p_{n} has transitional mean {mean}")
    where = f"(s={seq.s}, y={seq.y}, t={seq.t})"
    return orthogonal_from_moments(seq.moments, K, f"transitional at {where}", where=where)


@dataclass(frozen=True)
class FamilyComparison:
    kind: str  # "equal" | "constant-recombination" | "unrelated"
    L: tuple[tuple[Fraction, ...], ...] | None = None
    note: str = ""


def compare_families(A: Sequence, B: Sequence) -> FamilyComparison:
    """Decide whether A = L B for a constant unit lower-triangular L."""
    A = [a if isinstance(a, SpaceTimePolynomial) else SpaceTimePolynomial(a) for a in A]
    B = [b if isinstance(b, SpaceTimePolynomial) else SpaceTimePolynomial(b) for b in B]
    if len(A) != len(B):
        return FamilyComparison("unrelated", note="different lengths")
    if A == B:
        return FamilyComparison("equal")
    if any(b.degree != n or b.leading() != 1 for n, b in enumerate(B)):
        return FamilyComparison("unrelated", note="second family is not monic graded")
    rows = []
    for n, a in enumerate(A):
        if a.degree != n:
            return FamilyComparison("unrelated", note=f"member {n} has degree {a.degree}")
        rem = list(a.coeffs)
        row = [Fraction(0)] * len(A)
        for k in range(n, -1, -1):
            c = rem[k]
            if c.is_zero():
                continue
            if not c.is_constant():
                return FamilyComparison("unrelated", note=f"order {n}: coefficient {c} depends on time")
            row[k] = c.constant()
            for j, bj in enumerate(B[k].coeffs):
                rem[j] = rem[j] - bj * c
        rows.append(tuple(row))
    return FamilyComparison("constant-recombination", tuple(rows))
