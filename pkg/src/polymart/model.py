"""Processes described by their raw moment functions ``g_n(t) = E X_t^n``.

Provides the builtin Lévy models, the line-oriented model file format,
increment moments of an independent-increment model and the Lévy
convolution check.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, factorial
from typing import Iterable, Sequence

from .algebra import (
    S,
    T,
    RationalFunction,
    TimePolynomial,
    as_rational,
    leading_principal_minors,
    rf,
)
from .errors import (
    DegenerateAtPoint,
    InvalidParameter,
    MissingOrder,
    ModelSyntaxError,
    MomentInfeasible,
    NonPolynomialTime,
    OrderOutOfRange,
    UnknownModel,
)
from .report import CheckReport

DEFAULT_GRID: tuple[Fraction, ...] = (Fraction(1, 2), Fraction(1), Fraction(2), Fraction(3))

MGF_NOTE = "assumed: moment generating function of X_t exists near 0 (not verifiable from finitely many moments)"


@dataclass(frozen=True)
class MomentModel:
    """``moments[n]`` is ``g_n(t)``; ``moments[0]`` is identically 1."""

    name: str
    moments: tuple[RationalFunction, ...]
    params: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def max_order(self) -> int:
        return len(self.moments) - 1

    @property
    def starts_at_origin(self) -> bool:
        try:
            return all(g.subs(t=0).is_zero() for g in self.moments[1:])
        except DegenerateAtPoint:
            return False

    def g(self, n: int) -> RationalFunction:
        if not 0 <= n <= self.max_order:
            raise OrderOutOfRange(f"moment order {n} outside 0..{self.max_order}")
        return self.moments[n]

    def moments_at(self, t) -> list[Fraction]:
        t = as_rational(t)
        return [g.evaluate(t=t) for g in self.moments]

    def is_polynomial(self) -> bool:
        return all(g.is_polynomial() and g.variables <= {"t"} for g in self.moments)

    def hankel_minors(self, t) -> list[Fraction]:
        nu = self.moments_at(t)
        k = self.max_order // 2
        return leading_principal_minors([[nu[i + j] for j in range(k + 1)] for i in range(k + 1)])

    def validate(self, grid: Iterable = DEFAULT_GRID) -> "MomentModel":
        """Check g_0 = 1, g_n(0) = 0 and Hankel positivity on ``grid``."""
        if not self.moments or self.moments[0] != 1:
            raise InvalidParameter("g_0 must be identically 1")
        for n, g in enumerate(self.moments[1:], start=1):
            if not g.variables <= {"t"}:
                raise InvalidParameter(f"g_{n} depends on {sorted(g.variables)}; only t is allowed")
            try:
                at0 = g.subs(t=0)
            except DegenerateAtPoint:
                raise InvalidParameter(f"g_{n} has a pole at t = 0") from None
            if not at0.is_zero():
                raise InvalidParameter(f"g_{n}(0) = {at0}; the process must start at 0")
        for t in grid:
            t = as_rational(t)
            try:
                minors = self.hankel_minors(t)
            except DegenerateAtPoint:
                raise InvalidParameter(f"moment function has a pole at t = {t}") from None
            for idx, d in enumerate(minors, start=1):
                if d <= 0:
                    raise MomentInfeasible(t, idx, d)
        return self


def make_model(name: str, moments: Sequence, *, validate: bool = True, grid: Iterable = DEFAULT_GRID,
               params: dict | None = None) -> MomentModel:
    gs = [rf(g) if not isinstance(g, TimePolynomial) else g.to_function() for g in moments]
    if not gs:
        gs = [RationalFunction(1)]
    model = MomentModel(name, tuple(gs), dict(params or {}))
    if validate:
        model.validate(grid)
    return model


def moments_from_cumulants(kappa: Sequence[RationalFunction], N: int) -> list[RationalFunction]:
    """Raw moments via g_n = sum_k C(n-1, k-1) kappa_k g_{n-k}; ``kappa[0]`` unused."""
    g = [RationalFunction(1)]
    for n in range(1, N + 1):
        acc = RationalFunction(0)
        for k in range(1, n + 1):
            if kappa[k]:
                acc = acc + comb(n - 1, k - 1) * kappa[k] * g[n - k]
        g.append(acc)
    return g


BUILTINS = ("wiener", "poisson", "gamma", "bernoulli-jumps")


def builtin(name: str, N: int, lam=None) -> MomentModel:
    """Builtin Lévy model truncated at order ``N``.

    ``lam`` is the jump rate for ``poisson`` and ``bernoulli-jumps`` (default 1).
    """
    if N < 2:
        raise InvalidParameter("builtin models need N >= 2")
    zero = RationalFunction(0)
    if name in ("poisson", "bernoulli-jumps"):
        lam = Fraction(1) if lam is None else as_rational(lam)
        if lam <= 0:
            raise InvalidParameter(f"rate must be positive, got {lam}")
    elif lam is not None:
        raise InvalidParameter(f"{name} takes no parameter")
    if name == "wiener":
        kappa = [zero, zero, T] + [zero] * (N - 1)
        label = "wiener"
    elif name == "poisson":
        kappa = [zero] + [lam * T] * N
        label = f"poisson:{lam}"
    elif name == "gamma":
        kappa = [zero] + [factorial(n - 1) * T for n in range(1, N + 1)]
        label = "gamma"
    elif name == "bernoulli-jumps":
        kappa = [zero] + [lam * T if n % 2 == 0 else zero for n in range(1, N + 1)]
        label = f"bernoulli-jumps:{lam}"
    else:
        raise UnknownModel(f"unknown builtin model {name!r}; choose from {BUILTINS}")
    params = {"process": name}
    if lam is not None:
        params["lam"] = lam
    return make_model(label, moments_from_cumulants(kappa, N), params=params)


def parse_model_spec(spec: str, N: int) -> MomentModel:
    """``wiener``, ``poisson:1/2``, ``bernoulli-jumps:2`` style names."""
    name, _, param = spec.partition(":")
    try:
        lam = as_rational(param) if param else None
    except (ValueError, ZeroDivisionError):
        raise InvalidParameter(f"bad parameter {param!r}") from None
    return builtin(name.strip(), N, lam)


# ---------------------------------------------------------------------------
# model files

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<str>\"[^\"]*\")|(?P<op>[-+*^/()\[\]=]))")


class _Lexer:
    def __init__(self, text: str, line: int):
        self.line = line
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            if text[pos].isspace():
                pos += 1
                continue
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise ModelSyntaxError(f"unexpected character {text[pos]!r}", line, pos + 1)
            kind = m.lastgroup
            start = m.start(kind)
            self.tokens.append((kind, m.group(kind), start + 1))
            pos = m.end()
        self.i = 0
        self.end_col = len(text) + 1

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else ("eof", "", self.end_col)

    def take(self, kind=None, value=None):
        tok = self.peek()
        if (kind and tok[0] != kind) or (value is not None and tok[1] != value):
            want = value or kind
            got = tok[1] or "end of line"
            raise ModelSyntaxError(f"expected {want!r}, found {got!r}", self.line, tok[2])
        self.i += 1
        return tok


def _parse_expr(lx: _Lexer) -> TimePolynomial:
    sign = 1
    if lx.peek()[0] == "op" and lx.peek()[1] in ("+", "-"):
        sign = -1 if lx.take()[1] == "-" else 1
    acc = _parse_term(lx) * sign
    while lx.peek()[0] == "op" and lx.peek()[1] in ("+", "-"):
        op = lx.take()[1]
        term = _parse_term(lx)
        acc = acc + term if op == "+" else acc - term
    return acc


def _parse_term(lx: _Lexer) -> TimePolynomial:
    acc = _parse_factor(lx)
    while lx.peek()[0] == "op" and lx.peek()[1] == "*":
        lx.take()
        acc = acc * _parse_factor(lx)
    return acc


def _parse_factor(lx: _Lexer) -> TimePolynomial:
    base = _parse_primary(lx)
    if lx.peek()[0] == "op" and lx.peek()[1] == "^":
        lx.take()
        exp = int(lx.take("num")[1])
        base = base**exp
    return base


def _parse_primary(lx: _Lexer) -> TimePolynomial:
    kind, value, col = lx.peek()
    if kind == "num":
        lx.take()
        num = Fraction(int(value))
        if lx.peek()[0] == "op" and lx.peek()[1] == "/":
            lx.take()
            den = int(lx.take("num")[1])
            if den == 0:
                raise ModelSyntaxError("zero denominator in literal", lx.line, col)
            num = num / den
        return TimePolynomial.constant(num)
    if kind == "name" and value == "t":
        lx.take()
        return TimePolynomial.t()
    if kind == "op" and value == "(":
        lx.take()
        inner = _parse_expr(lx)
        lx.take("op", ")")
        return inner
    got = value or "end of line"
    raise ModelSyntaxError(f"expected a number, 't' or '(', found {got!r}", lx.line, col)


def parse_model(text: str, *, grid: Iterable = DEFAULT_GRID, validate: bool = True) -> MomentModel:
    """Parse a model file into a validated :class:`MomentModel`."""
    name = "model"
    assigned: dict[int, TimePolynomial] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        lx = _Lexer(line, lineno)
        kind, value, col = lx.peek()
        if kind == "name" and value == "model":
            lx.take()
            name = lx.take("str")[1][1:-1]
        elif kind == "name" and value == "g":
            lx.take()
            lx.take("op", "[")
            order_tok = lx.take("num")
            lx.take("op", "]")
            lx.take("op", "=")
            order = int(order_tok[1])
            if order in assigned:
                raise ModelSyntaxError(f"g[{order}] assigned twice", lineno, order_tok[2])
            assigned[order] = _parse_expr(lx)
        else:
            raise ModelSyntaxError(f"expected 'model' or 'g[...]', found {value!r}", lineno, col)
        if lx.peek()[0] != "eof":
            tok = lx.peek()
            raise ModelSyntaxError(f"unexpected {tok[1]!r}", lineno, tok[2])
    if 0 in assigned and assigned.pop(0) != 1:
        raise InvalidParameter("g[0] must be 1")
    if not assigned:
        raise MissingOrder(1)
    top = max(assigned)
    for n in range(1, top + 1):
        if n not in assigned:
            raise MissingOrder(n)
    moments = [TimePolynomial.constant(1)] + [assigned[n] for n in range(1, top + 1)]
    return make_model(name, moments, validate=validate, grid=grid)


def serialize_model(model: MomentModel) -> str:
    if not model.is_polynomial():
        raise NonPolynomialTime("only polynomial-in-t models have a file form")
    lines = [f'model "{model.name}"']
    for n, g in enumerate(model.moments[1:], start=1):
        lines.append(f"g[{n}] = {g.as_time_polynomial().to_string()}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# increments


@dataclass(frozen=True)
class IncrementMoments:
    """``gamma[n]`` is E(X_t - X_s)^n as a function of the symbols s and t."""

    gamma: tuple[RationalFunction, ...]

    def at(self, s, t) -> list[Fraction]:
        return [g.evaluate(s=as_rational(s), t=as_rational(t)) for g in self.gamma]


def reciprocal_moments(model: MomentModel, n: int, at=S) -> list[RationalFunction]:
    """Coefficients h_j of 1/E[exp(z X)] (exponential generating form).

    h_0 = 1 and sum_j C(k, j) g_j h_{k-j} = 0 for k >= 1.
    """
    g = [model.g(j).subs(t=at) for j in range(n + 1)]
    h = [RationalFunction(1)]
    for k in range(1, n + 1):
        acc = RationalFunction(0)
        for j in range(1, k + 1):
            if g[j]:
                acc = acc - comb(k, j) * g[j] * h[k - j]
        h.append(acc)
    return h


def increment_moments(model: MomentModel, n: int) -> IncrementMoments:
    """Moments of X_t - X_s for an independent-increment model, orders 0..n.

    With independent increments E exp(z X_t) = E exp(z X_s) * E exp(z (X_t - X_s)),
    so the increment moments are the binomial convolution of g(t) with the
    reciprocal sequence of g(s).
    """
    if not 0 <= n <= model.max_order:
        raise OrderOutOfRange(f"order {n} outside 0..{model.max_order}")
    h = reciprocal_moments(model, n)
    gamma = []
    for k in range(n + 1):
        acc = RationalFunction(0)
        for j in range(k + 1):
            if h[j]:
                acc = acc + comb(k, j) * model.g(k - j) * h[j]
        gamma.append(acc)
    for k, gk in enumerate(gamma[1:], start=1):
        if not gk.subs(t=S).is_zero():
            raise AssertionError(f"gamma_{k}(s, s) = {gk.subs(t=S)}")
    return IncrementMoments(tuple(gamma))


def levy_check(model: MomentModel, N: int | None = None) -> CheckReport:
    """Stationary-increment test g_n(t + s) = sum_j C(n, j) g_{n-j}(t) g_j(s)."""
    N = model.max_order if N is None else N
    if N > model.max_order:
        raise OrderOutOfRange(f"N = {N} exceeds model order {model.max_order}")
    for n in range(N + 1):
        if not model.g(n).is_polynomial():
            raise NonPolynomialTime(f"g_{n} = {model.g(n)} is not a polynomial in t")
    at_s = [model.g(j).subs(t=S) for j in range(N + 1)]
    residuals = {}
    failed = []
    for n in range(1, N + 1):
        conv = RationalFunction(0)
        for j in range(n + 1):
            conv = conv + comb(n, j) * model.g(n - j) * at_s[j]
        res = model.g(n).subs(t=T + S) - conv
        residuals[f"order_{n}"] = res
        if not res.is_zero():
            failed.append(n)
    notes = [MGF_NOTE]
    if failed:
        notes.append(f"convolution identity fails at orders {failed}")
    return CheckReport("levy", "fail" if failed else "pass", residuals=residuals, notes=notes)
