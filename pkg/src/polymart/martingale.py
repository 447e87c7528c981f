"""Polynomial martingale families and the operations built on them.

A family member ``M_n(x, t)`` is a :class:`SpaceTimePolynomial`: a polynomial
in the state ``x`` whose coefficients are rational functions of the time
indeterminate ``t``.  "Evaluating at time tau" substitutes ``t -> tau`` in
every coefficient, where tau is a Fraction or another rational function
(for instance the symbol ``s``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Iterable, Sequence

from .algebra import S, T, RationalFunction, RFMatrix, TimePolynomial, as_rational, rf
from .errors import (
    CertificationFailed,
    InsufficientMoments,
    InvalidParameter,
    OrderOutOfRange,
    TimeOrderViolation,
)
from .model import MomentModel, increment_moments, make_model


class SpaceTimePolynomial:
    """Polynomial in ``x`` with rational-function coefficients (lowest power first)."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable = ()):
        cs = [rf(c) for c in coeffs]
        while cs and cs[-1].is_zero():
            cs.pop()
        self.coeffs: tuple[RationalFunction, ...] = tuple(cs)

    @classmethod
    def x(cls) -> "SpaceTimePolynomial":
        return cls((0, 1))

    @classmethod
    def monomial(cls, k: int, coeff=1) -> "SpaceTimePolynomial":
        return cls([0] * k + [coeff])

    @classmethod
    def constant(cls, c) -> "SpaceTimePolynomial":
        return cls((c,))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def leading(self) -> RationalFunction:
        return self.coeffs[-1] if self.coeffs else RationalFunction(0)

    def coeff(self, k: int) -> RationalFunction:
        return self.coeffs[k] if 0 <= k < len(self.coeffs) else RationalFunction(0)

    def is_zero(self) -> bool:
        return not self.coeffs

    def _coerce(self, other) -> "SpaceTimePolynomial":
        if isinstance(other, SpaceTimePolynomial):
            return other
        return SpaceTimePolynomial.constant(other)

    def __add__(self, other):
        other = self._coerce(other)
        n = max(len(self.coeffs), len(other.coeffs))
        return SpaceTimePolynomial(self.coeff(k) + other.coeff(k) for k in range(n))

    __radd__ = __add__

    def __neg__(self):
        return SpaceTimePolynomial(-c for c in self.coeffs)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, SpaceTimePolynomial):
            c = rf(other)
            return SpaceTimePolynomial(a * c for a in self.coeffs)
        if self.is_zero() or other.is_zero():
            return SpaceTimePolynomial()
        out = [RationalFunction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a.is_zero():
                continue
            for j, b in enumerate(other.coeffs):
                if not b.is_zero():
                    out[i + j] = out[i + j] + a * b
        return SpaceTimePolynomial(out)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, SpaceTimePolynomial):
            try:
                other = SpaceTimePolynomial.constant(other)
            except TypeError:
                return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def subs(self, mapping=None, **kw) -> "SpaceTimePolynomial":
        return SpaceTimePolynomial(c.subs(mapping, **kw) for c in self.coeffs)

    def at_time(self, tau) -> "SpaceTimePolynomial":
        """Substitute the time indeterminate ``t`` by ``tau``."""
        if isinstance(tau, RationalFunction) and tau == T:
            return self
        return self.subs(t=tau)

    def __call__(self, x):
        acc = RationalFunction(0)
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def variables(self) -> frozenset[str]:
        out: set[str] = set()
        for c in self.coeffs:
            out |= c.variables
        return frozenset(out)

    def __str__(self):
        if not self.coeffs:
            return "0"
        parts = []
        for k in range(len(self.coeffs) - 1, -1, -1):
            c = self.coeffs[k]
            if c.is_zero():
                continue
            mono = "" if k == 0 else ("x" if k == 1 else f"x^{k}")
            cs = str(c)
            if not mono:
                body = cs
            elif c == 1:
                body = mono
            elif c == -1:
                body = "-" + mono
            elif c.is_constant() or (" " not in cs and not cs.startswith("(")):
                body = f"{cs}*{mono}"
            else:
                body = f"({cs})*{mono}"
            parts.append(body)
        out = parts[0]
        for p in parts[1:]:
            out += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
        return out

    def __repr__(self):
        return f"SpaceTimePolynomial({str(self)!r})"


X = SpaceTimePolynomial.x()


def expectation(model: MomentModel, p: SpaceTimePolynomial, time=T) -> RationalFunction:
    """Apply the marginal moment functional at ``time`` to the state polynomial ``p``.

    Only the moments g_k are evaluated at ``time``; the coefficients of ``p``
    are used as given, so they may mention other time symbols.
    """
    if p.degree > model.max_order:
        raise InsufficientMoments(f"degree {p.degree} exceeds moment capacity {model.max_order}")
    generic = isinstance(time, RationalFunction) and time == T
    acc = RationalFunction(0)
    for k, c in enumerate(p.coeffs):
        if not c.is_zero():
            g = model.g(k)
            acc = acc + c * (g if generic else g.subs(t=time))
    return acc


def _is_concrete(tau) -> bool:
    return not isinstance(tau, RationalFunction) or tau.is_constant()


def _check_order(earlier, later, what: str = "times") -> None:
    if _is_concrete(earlier) and _is_concrete(later) and as_rational(earlier) > as_rational(later):
        raise TimeOrderViolation(f"{what} out of order: {earlier} > {later}")


def _time(tau):
    if isinstance(tau, RationalFunction):
        return tau.constant() if tau.is_constant() else tau
    return as_rational(tau)


def increment_transition(model: MomentModel, p: SpaceTimePolynomial, s=S, t=T) -> SpaceTimePolynomial:
    """E(p(X_t) | X_s = x) for an independent-increment model.

    Built only from the marginal moments: E(X_t^n | X_s = x) equals
    sum_j C(n, j) x^j gamma_{n-j}(s, t) with gamma the increment moments.
    """
    n = p.degree
    if n > model.max_order:
        raise InsufficientMoments(f"degree {n} exceeds moment capacity {model.max_order}")
    gamma = increment_moments(model, max(n, 0)).gamma
    out = [RationalFunction(0)] * (n + 1)
    for k, c in enumerate(p.coeffs):
        if c.is_zero():
            continue
        for j in range(k + 1):
            if not gamma[k - j].is_zero():
                out[j] = out[j] + c * comb(k, j) * gamma[k - j]
    result = SpaceTimePolynomial(out)
    subs = {}
    if not (isinstance(s, RationalFunction) and s == S):
        subs["s"] = s
    if not (isinstance(t, RationalFunction) and t == T):
        subs["t"] = t
    if subs:
        # substitute t first so that a value mentioning s is not clobbered
        result = SpaceTimePolynomial(
            c.subs(t=subs["t"]) if "t" in subs else c for c in result.coeffs
        )
        if "s" in subs:
            result = result.subs(s=subs["s"])
    return result


def ind_recurrence(model: MomentModel, N: int) -> list[SpaceTimePolynomial]:
    """M_n = x^n - g_n - sum_{j=1}^{n-1} C(n, j) g_j M_{n-j}."""
    members = [SpaceTimePolynomial.constant(1)]
    for n in range(1, N + 1):
        m = SpaceTimePolynomial.monomial(n) - model.g(n)
        for j in range(1, n):
            gj = model.g(j)
            if not gj.is_zero():
                m = m - members[n - j] * (comb(n, j) * gj)
        members.append(m)
    return members


def certification_residuals(model: MomentModel, members: Sequence[SpaceTimePolynomial]) -> list[SpaceTimePolynomial]:
    """E(M_n(X_t, t) | X_s = x) - M_n(x, s), identically in x, s and t."""
    return [increment_transition(model, m) - m.at_time(S) for m in members]


@dataclass(frozen=True, eq=False)
class MartingaleFamily:
    model: MomentModel
    members: tuple[SpaceTimePolynomial, ...]
    certified: tuple[bool, ...]
    canonical: bool = False
    source: str = "user"
    _memo: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def N(self) -> int:
        return len(self.members) - 1

    @property
    def capacity(self) -> int:
        return self.model.max_order

    @property
    def is_certified(self) -> bool:
        return all(self.certified)

    def __getitem__(self, n: int) -> SpaceTimePolynomial:
        if not 0 <= n <= self.N:
            raise OrderOutOfRange(f"member {n} outside 0..{self.N}")
        return self.members[n]

    def members_at(self, tau) -> tuple[SpaceTimePolynomial, ...]:
        if isinstance(tau, RationalFunction) and tau == T:
            return self.members
        key = ("at", _time(tau))
        if key not in self._memo:
            self._memo[key] = tuple(m.at_time(tau) for m in self.members)
        return self._memo[key]

    def describe(self) -> str:
        kind = "canonical increment-recurrence family" if self.canonical else f"{self.source} family"
        return f"{kind} of {self.model.name}, N={self.N}"

    # serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "model": self.model.name,
            "N": self.N,
            "canonical": self.canonical,
            "source": self.source,
            "certified": list(self.certified),
            "moments": [_encode_coeff(g) for g in self.model.moments],
            "members": [[_encode_coeff(c) for c in m.coeffs] for m in self.members],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _encode_coeff(c: RationalFunction):
    if c.is_constant():
        return str(c.constant())
    num, den = c.numerator(), c.denominator()
    return {
        "num": [str(x) for x in num.as_time_polynomial().coeffs],
        "den": [str(x) for x in den.as_time_polynomial().coeffs],
    }


def _decode_coeff(obj) -> RationalFunction:
    if isinstance(obj, str):
        return RationalFunction(Fraction(obj))
    num = TimePolynomial(Fraction(x) for x in obj["num"]).to_function()
    den = TimePolynomial(Fraction(x) for x in obj["den"]).to_function()
    return num / den


def family_from_json(text: str) -> MartingaleFamily:
    data = json.loads(text) if isinstance(text, str) else text
    model = make_model(data["model"], [_decode_coeff(g) for g in data["moments"]], validate=False)
    members = tuple(SpaceTimePolynomial(_decode_coeff(c) for c in m) for m in data["members"])
    if len(members) != data["N"] + 1:
        raise InvalidParameter("member count does not match N")
    return MartingaleFamily(model, members, tuple(data["certified"]), data["canonical"], data.get("source", "user"))


def build_family(model: MomentModel, N: int | None = None) -> MartingaleFamily:
    """Monic family from the increment recurrence, certified symbolically."""
    N = model.max_order if N is None else N
    if not 0 <= N <= model.max_order:
        raise OrderOutOfRange(f"N = {N} outside 0..{model.max_order}")
    members = ind_recurrence(model, N)
    for n, res in enumerate(certification_residuals(model, members)):
        if not res.is_zero():
            raise CertificationFailed(n, res)
    return MartingaleFamily(model, tuple(members), (True,) * (N + 1), canonical=True, source="increment-recurrence")


def family_from_members(model: MomentModel, members: Sequence, *, certify: bool = True,
                        strict: bool = True, source: str = "user") -> MartingaleFamily:
    """Ingest a user family: normalize to monic, then (optionally) certify.

    With ``strict`` a failing member raises :class:`CertificationFailed`;
    otherwise the per-member flags record the outcome.
    """
    polys = []
    for n, m in enumerate(members):
        p = m if isinstance(m, SpaceTimePolynomial) else SpaceTimePolynomial(m)
        if p.degree != n:
            raise InvalidParameter(f"member {n} has degree {p.degree}")
        polys.append(p * (1 / p.leading()) if p.leading() != 1 else p)
    if len(polys) - 1 > model.max_order:
        raise InsufficientMoments("family longer than the model's moment capacity")
    if certify:
        residuals = certification_residuals(model, polys)
        flags = tuple(r.is_zero() for r in residuals)
        if strict:
            for n, r in enumerate(residuals):
                if not r.is_zero():
                    raise CertificationFailed(n, r)
    else:
        flags = (False,) * len(polys)
    return MartingaleFamily(model, tuple(polys), flags, canonical=False, source=source)


def recombine(fam: MartingaleFamily, L: Sequence[Sequence], *, source: str = "recombined") -> MartingaleFamily:
    """Family with members sum_k L[n][k] M_k for a constant unit lower-triangular L."""
    rows = [[as_rational(x) for x in r] for r in L]
    members = []
    for n, row in enumerate(rows):
        acc = SpaceTimePolynomial()
        for k, c in enumerate(row[: n + 1]):
            if c:
                acc = acc + fam.members[k] * c
        members.append(acc)
    return family_from_members(fam.model, members, certify=True, source=source)


# ---------------------------------------------------------------------------
# structural matrix and basis changes


def structural_matrix(model: MomentModel, n: int) -> RFMatrix:
    """V_n(t) = [C(i, j) g_{i-j}(t)], mapping (1, M_1, ..., M_n) to (1, x, ..., x^n)."""
    if not 0 <= n <= model.max_order:
        raise OrderOutOfRange(f"order {n} outside 0..{model.max_order}")
    V = RFMatrix([[comb(i, j) * model.g(i - j) if j <= i else 0 for j in range(n + 1)] for i in range(n + 1)])
    members = ind_recurrence(model, n)
    for i in range(n + 1):
        acc = SpaceTimePolynomial()
        for j in range(i + 1):
            acc = acc + members[j] * V[i, j]
        if acc != SpaceTimePolynomial.monomial(i):
            raise AssertionError(f"structural identity fails in row {i}")
    return V


def to_martingale_basis(p: SpaceTimePolynomial, fam: MartingaleFamily, time=T) -> list[RationalFunction]:
    """Coefficients c_k with p = sum_k c_k M_k(., time); exact back-substitution."""
    if p.degree > fam.N:
        raise OrderOutOfRange(f"degree {p.degree} exceeds family order {fam.N}")
    basis = fam.members_at(time)
    rem = list(p.coeffs)
    out = [RationalFunction(0)] * (p.degree + 1)
    for k in range(p.degree, -1, -1):
        c = rem[k]
        if c.is_zero():
            continue
        out[k] = c
        for j, b in enumerate(basis[k].coeffs):
            if not b.is_zero():
                rem[j] = rem[j] - c * b
    return out


def from_martingale_basis(coeffs: Sequence, fam: MartingaleFamily, time=T) -> SpaceTimePolynomial:
    basis = fam.members_at(time)
    acc = SpaceTimePolynomial()
    for k, c in enumerate(coeffs):
        c = rf(c)
        if not c.is_zero():
            acc = acc + basis[k] * c
    return acc


def conditional_expectation(p: SpaceTimePolynomial, fam: MartingaleFamily, s=S, t=T) -> SpaceTimePolynomial:
    """E(p(X_t) | F_s) as a polynomial in the state at ``s``.

    ``p`` is read at time ``t``; it is expanded in the family basis at ``t``
    and the basis is then re-evaluated at ``s``.
    """
    _check_order(s, t)
    if not (isinstance(t, RationalFunction) and t == T):
        p = p.at_time(t)
    coeffs = to_martingale_basis(p, fam, t)
    return from_martingale_basis(coeffs, fam, s)


@dataclass(frozen=True)
class ProductLinearization:
    """M_i M_j = sum_k delta[k] M_k at a common time."""

    i: int
    j: int
    delta: tuple[RationalFunction, ...]


def linearize_product(fam: MartingaleFamily, i: int, j: int) -> ProductLinearization:
    if i + j > fam.N:
        raise OrderOutOfRange(f"product degree {i + j} exceeds family order {fam.N}")
    key = ("lin", min(i, j), max(i, j))
    if key not in fam._memo:
        fam._memo[key] = tuple(to_martingale_basis(fam[i] * fam[j], fam))
    return ProductLinearization(i, j, fam._memo[key])


def cross_moment(fam: MartingaleFamily, n: int, m: int) -> RationalFunction:
    """E M_n(X_t, t) M_m(X_t, t) as a function of t."""
    if n + m > fam.capacity:
        raise InsufficientMoments(f"E M_{n} M_{m} needs moments to order {n + m}, capacity {fam.capacity}")
    key = ("cross", min(n, m), max(n, m))
    if key not in fam._memo:
        fam._memo[key] = expectation(fam.model, fam[n] * fam[m])
    return fam._memo[key]


def second_moment(fam: MartingaleFamily, n: int) -> RationalFunction:
    """m_n(t) = E M_n^2(X_t, t)."""
    return cross_moment(fam, n, n)


# ---------------------------------------------------------------------------
# iterated conditioning


@dataclass(frozen=True)
class IteratedConditionalExpansion:
    """E(prod_i M_{orders[i]}(times[i]) | F_s) = sum_j phi[j] M_j(s)."""

    times: tuple
    orders: tuple[int, ...]
    s: object
    phi: tuple[RationalFunction, ...]


def _condition_groups(fam: MartingaleFamily, groups: Sequence[tuple[object, SpaceTimePolynomial]]) -> list[RationalFunction]:
    """Fold polynomial factors attached to increasing times from the latest down.

    Returns the martingale-basis coefficients at the earliest time.
    """
    vec: list[RationalFunction] | None = None
    for tau, poly in reversed(groups):
        local = poly.at_time(tau)
        if vec is not None:
            local = local * from_martingale_basis(vec, fam, tau)
        if local.degree > fam.N:
            raise InsufficientMoments(f"intermediate degree {local.degree} exceeds family order {fam.N}")
        vec = to_martingale_basis(local, fam, tau)
    return vec or [RationalFunction(0)]


def iterated_conditional(fam: MartingaleFamily, times: Sequence, orders: Sequence[int], s) -> IteratedConditionalExpansion:
    if len(times) != len(orders) or not times:
        raise InvalidParameter("need one order per time point")
    if sum(orders) > fam.N:
        raise InsufficientMoments(f"total order {sum(orders)} exceeds family order {fam.N}")
    for a, b in zip(times, times[1:]):
        _check_order(a, b)
        if _is_concrete(a) and _is_concrete(b) and as_rational(a) == as_rational(b):
            raise TimeOrderViolation("time points must be strictly increasing")
    _check_order(s, times[0])
    if _is_concrete(s) and _is_concrete(times[0]) and as_rational(s) == as_rational(times[0]):
        raise TimeOrderViolation("conditioning time must precede the first time point")
    groups = [(tau, fam[k]) for tau, k in zip(times, orders)]
    vec = _condition_groups(fam, groups)
    # the basis coefficients carry over unchanged from times[0] to s
    return IteratedConditionalExpansion(tuple(times), tuple(orders), s, tuple(vec))


def joint_moment(fam: MartingaleFamily, factors: Sequence[tuple[SpaceTimePolynomial, object]]) -> RationalFunction:
    """E of a product of polynomials of the state at non-decreasing times.

    Each factor is ``(poly, time)`` where ``poly`` is read with ``t -> time``.
    Factors sharing a time are multiplied before conditioning.
    """
    groups: list[tuple[object, SpaceTimePolynomial]] = []
    for poly, tau in factors:
        tau = _time(tau)
        if groups and groups[-1][0] == tau:
            groups[-1] = (tau, groups[-1][1] * poly)
        else:
            if groups:
                _check_order(groups[-1][0], tau)
            groups.append((tau, poly))
    if not groups:
        return RationalFunction(1)
    vec = _condition_groups(fam, groups)
    first = groups[0][0]
    # vec may mention the later time symbols but never t itself
    return expectation(fam.model, from_martingale_basis(vec, fam, first), time=first)
