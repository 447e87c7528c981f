"""Exact scalar, polynomial and rational-function arithmetic.

Three carriers live here:

* ``Rational`` -- an alias of :class:`fractions.Fraction`.
* :class:`TimePolynomial` -- dense univariate polynomial in ``t`` with rational
  coefficients.  Used for model files, serialization and composition.
* :class:`RationalFunction` -- exact rational function in the fixed set of
  indeterminates ``t, s, u, m_s, m_t, m_u``.  Backed by sympy's sparse
  multivariate fraction field, which keeps every value in lowest terms.

Linear algebra over the rational-function field (:func:`determinant`,
:func:`solve_linear`) uses fraction-free Bareiss elimination.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

from sympy import QQ
from sympy.polys.fields import field

from .errors import (
    DegenerateAtPoint,
    DivisionByZeroFunction,
    ShapeMismatch,
    SingularSystem,
)

Rational = Fraction

VARIABLES = ("t", "s", "u", "m_s", "m_t", "m_u")
_FIELD, *_GENS = field(",".join(VARIABLES), QQ)
_INDEX = {name: i for i, name in enumerate(VARIABLES)}


def as_rational(value) -> Fraction:
    """Coerce ints, Fractions and ``"p/q"`` strings to a Fraction.

    Floats are rejected: nothing in the exact layer may round.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("bool is not a rational")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, RationalFunction) and value.is_constant():
        return value.constant()
    if hasattr(value, "numerator") and hasattr(value, "denominator") and not isinstance(value, float):
        return Fraction(int(value.numerator), int(value.denominator))
    raise TypeError(f"cannot interpret {value!r} as an exact rational")


def _ground(value: Fraction):
    return QQ(value.numerator, value.denominator)


def _to_fraction(q) -> Fraction:
    return Fraction(int(q.numerator), int(q.denominator))


# ---------------------------------------------------------------------------
# univariate polynomials in t


class TimePolynomial:
    """Polynomial in ``t`` with Fraction coefficients, lowest power first."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable = ()):
        cs = [as_rational(c) for c in coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        self.coeffs: tuple[Fraction, ...] = tuple(cs)

    @classmethod
    def t(cls) -> "TimePolynomial":
        return cls((0, 1))

    @classmethod
    def constant(cls, c) -> "TimePolynomial":
        return cls((c,))

    @property
    def degree(self) -> int:
        """Degree, with ``-1`` for the zero polynomial."""
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def leading(self) -> Fraction:
        return self.coeffs[-1] if self.coeffs else Fraction(0)

    def _coerce(self, other) -> "TimePolynomial":
        if isinstance(other, TimePolynomial):
            return other
        return TimePolynomial.constant(as_rational(other))

    def __add__(self, other):
        other = self._coerce(other)
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (Fraction(0),) * (n - len(self.coeffs))
        b = other.coeffs + (Fraction(0),) * (n - len(other.coeffs))
        return TimePolynomial(x + y for x, y in zip(a, b))

    __radd__ = __add__

    def __neg__(self):
        return TimePolynomial(-c for c in self.coeffs)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        if not self.coeffs or not other.coeffs:
            return TimePolynomial()
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(other.coeffs):
                    out[i + j] += a * b
        return TimePolynomial(out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power of a polynomial")
        result = TimePolynomial.constant(1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, TimePolynomial):
            return self.coeffs == other.coeffs
        try:
            return self.coeffs == TimePolynomial.constant(as_rational(other)).coeffs
        except TypeError:
            return NotImplemented

    def __hash__(self):
        return hash(("TimePolynomial", self.coeffs))

    def __divmod__(self, other):
        other = self._coerce(other)
        if other.is_zero():
            raise DivisionByZeroFunction("polynomial division by zero")
        rem = list(self.coeffs)
        quot = [Fraction(0)] * max(len(rem) - len(other.coeffs) + 1, 0)
        lead = other.coeffs[-1]
        for k in range(len(quot) - 1, -1, -1):
            c = rem[k + len(other.coeffs) - 1] / lead
            quot[k] = c
            if c:
                for j, b in enumerate(other.coeffs):
                    rem[k + j] -= c * b
        return TimePolynomial(quot), TimePolynomial(rem)

    def __floordiv__(self, other):
        return divmod(self, other)[0]

    def __mod__(self, other):
        return divmod(self, other)[1]

    def monic(self) -> "TimePolynomial":
        if self.is_zero():
            return self
        lead = self.coeffs[-1]
        return TimePolynomial(c / lead for c in self.coeffs)

    def gcd(self, other) -> "TimePolynomial":
        """Monic greatest common divisor (Euclid)."""
        a, b = self, self._coerce(other)
        while not b.is_zero():
            a, b = b, a % b
        return a.monic()

    def __call__(self, value):
        """Horner evaluation; ``value`` may be a Fraction or RationalFunction."""
        if not isinstance(value, RationalFunction):
            value = as_rational(value)
            acc = Fraction(0)
        else:
            acc = RationalFunction(0)
        for c in reversed(self.coeffs):
            acc = acc * value + c
        return acc

    def compose(self, inner: "TimePolynomial") -> "TimePolynomial":
        acc = TimePolynomial()
        for c in reversed(self.coeffs):
            acc = acc * inner + c
        return acc

    def to_function(self) -> "RationalFunction":
        return self(RationalFunction.symbol("t"))

    def to_string(self, var: str = "t") -> str:
        terms = [(k, c) for k, c in enumerate(self.coeffs) if c]
        return _format_terms([(c, _monomial_str({var: k})) for k, c in terms])

    def __str__(self):
        return self.to_string()

    def __repr__(self):
        return f"TimePolynomial({self.to_string()!r})"


def _monomial_str(powers: Mapping[str, int]) -> str:
    parts = []
    for name, e in powers.items():
        if e == 1:
            parts.append(name)
        elif e > 1:
            parts.append(f"{name}^{e}")
    return "*".join(parts)


def _format_terms(terms: Sequence[tuple[Fraction, str]]) -> str:
    """Join ``(coefficient, monomial)`` pairs into ``a + b*t - c*t^2`` style."""
    if not terms:
        return "0"
    out = []
    for i, (c, mono) in enumerate(terms):
        neg = c < 0
        a = -c if neg else c
        if not mono:
            body = str(a)
        elif a == 1:
            body = mono
        else:
            body = f"{a}*{mono}"
        if i == 0:
            out.append(f"-{body}" if neg else body)
        else:
            out.append(f" - {body}" if neg else f" + {body}")
    return "".join(out)


# ---------------------------------------------------------------------------
# multivariate rational functions

Scalar = Union[int, Fraction]


class RationalFunction:
    """Exact element of Q(t, s, u, m_s, m_t, m_u); immutable and hashable."""

    __slots__ = ("_f",)

    def __init__(self, value=0):
        if isinstance(value, RationalFunction):
            self._f = value._f
        elif isinstance(value, TimePolynomial):
            self._f = value.to_function()._f
        elif hasattr(value, "field") and value.field == _FIELD:
            self._f = value
        else:
            self._f = _FIELD(_ground(as_rational(value)))

    @classmethod
    def symbol(cls, name: str) -> "RationalFunction":
        try:
            return cls(_GENS[_INDEX[name]])
        except KeyError:
            raise ValueError(f"unknown indeterminate {name!r}; known: {VARIABLES}") from None

    @staticmethod
    def _wrap(f) -> "RationalFunction":
        obj = RationalFunction.__new__(RationalFunction)
        obj._f = f
        return obj

    @staticmethod
    def _raw(other):
        if isinstance(other, RationalFunction):
            return other._f
        if isinstance(other, TimePolynomial):
            return other.to_function()._f
        return _FIELD(_ground(as_rational(other)))

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        try:
            return self._wrap(self._f + self._raw(other))
        except TypeError:
            return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        try:
            return self._wrap(self._f - self._raw(other))
        except TypeError:
            return NotImplemented

    def __rsub__(self, other):
        try:
            return self._wrap(self._raw(other) - self._f)
        except TypeError:
            return NotImplemented

    def __mul__(self, other):
        try:
            return self._wrap(self._f * self._raw(other))
        except TypeError:
            return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        try:
            d = self._raw(other)
        except TypeError:
            return NotImplemented
        if not d:
            raise DivisionByZeroFunction("division by the zero function")
        return self._wrap(self._f / d)

    def __rtruediv__(self, other):
        if not self._f:
            raise DivisionByZeroFunction("division by the zero function")
        try:
            return self._wrap(self._raw(other) / self._f)
        except TypeError:
            return NotImplemented

    def __neg__(self):
        return self._wrap(-self._f)

    def __pos__(self):
        return self

    def __pow__(self, k: int):
        if k < 0:
            if not self._f:
                raise DivisionByZeroFunction("negative power of the zero function")
            return self._wrap(1 / self._f ** (-k))
        return self._wrap(self._f**k)

    def __eq__(self, other):
        try:
            return self._f == self._raw(other)
        except TypeError:
            return NotImplemented

    def __hash__(self):
        if self.is_constant():
            return hash(self.constant())
        return hash(self._f)

    def __bool__(self):
        return bool(self._f)

    # inspection -----------------------------------------------------------
    def is_zero(self) -> bool:
        return not self._f

    def is_constant(self) -> bool:
        return self._f.numer.is_ground and self._f.denom.is_ground

    def constant(self) -> Fraction:
        if not self.is_constant():
            raise ValueError(f"{self} is not constant")
        return _to_fraction(self._f.numer.LC) / _to_fraction(self._f.denom.LC) if self._f.numer else Fraction(0)

    def is_polynomial(self) -> bool:
        return self._f.denom.is_ground

    @property
    def variables(self) -> frozenset[str]:
        used = set()
        for poly in (self._f.numer, self._f.denom):
            for monom in poly.monoms():
                used.update(VARIABLES[i] for i, e in enumerate(monom) if e)
        return frozenset(used)

    def _monic_parts(self):
        num, den = self._f.numer, self._f.denom
        lead = den.LC
        return num.quo_ground(lead), den.quo_ground(lead)

    def numerator(self) -> "RationalFunction":
        """Numerator after normalizing the denominator to be monic."""
        return self._wrap(_FIELD(self._monic_parts()[0]))

    def denominator(self) -> "RationalFunction":
        return self._wrap(_FIELD(self._monic_parts()[1]))

    def degree(self, var: str = "t") -> int:
        """Degree of the numerator in ``var`` (polynomials only)."""
        if not self.is_polynomial():
            raise ValueError("degree of a non-polynomial rational function")
        if not self._f:
            return -1
        return self._f.numer.degree(_INDEX[var])

    # substitution ---------------------------------------------------------
    def subs(self, mapping: Mapping[str, object] | None = None, **kw) -> "RationalFunction":
        """Substitute indeterminates by rationals or other rational functions.

        Raises :class:`DegenerateAtPoint` if the denominator vanishes.
        """
        values = dict(mapping or {})
        values.update(kw)
        if not values:
            return self
        idx = {}
        for name, v in values.items():
            if name not in _INDEX:
                raise ValueError(f"unknown indeterminate {name!r}")
            idx[_INDEX[name]] = self._raw(v)
        num = _subs_poly(self._f.numer, idx)
        den = _subs_poly(self._f.denom, idx)
        if not den:
            raise DegenerateAtPoint(f"denominator of {self} vanishes at {values}")
        return self._wrap(num / den)

    def evaluate(self, mapping: Mapping[str, object] | None = None, **kw) -> Fraction:
        out = self.subs(mapping, **kw)
        if not out.is_constant():
            raise ValueError(f"{out} still depends on {sorted(out.variables)}")
        return out.constant()

    def as_time_polynomial(self) -> TimePolynomial:
        if not self.is_polynomial() or not self.variables <= {"t"}:
            raise ValueError(f"{self} is not a polynomial in t alone")
        num, den = self._f.numer, self._f.denom
        scale = _to_fraction(den.LC)
        coeffs: dict[int, Fraction] = {}
        for monom, c in num.terms():
            coeffs[monom[0]] = _to_fraction(c) / scale
        deg = max(coeffs, default=-1)
        return TimePolynomial(coeffs.get(k, 0) for k in range(deg + 1))

    # printing -------------------------------------------------------------
    def __str__(self):
        num, den = self._monic_parts()
        ns = _poly_str(num)
        if den.is_ground:
            return ns
        return f"({ns})/({_poly_str(den)})"

    def __repr__(self):
        return f"RationalFunction({str(self)!r})"


def _subs_poly(poly, idx: Mapping[int, object]):
    cache: dict[tuple[int, int], object] = {}
    acc = _FIELD(0)
    for monom, coeff in poly.terms():
        term = _FIELD(coeff)
        for i, e in enumerate(monom):
            if not e:
                continue
            if i in idx:
                key = (i, e)
                if key not in cache:
                    cache[key] = idx[i] ** e
                term = term * cache[key]
            else:
                term = term * _GENS[i] ** e
        acc = acc + term
    return acc


def _poly_str(poly) -> str:
    items = sorted(poly.terms(), key=lambda mc: (sum(mc[0]), tuple(-e for e in mc[0])))
    terms = []
    for monom, c in items:
        powers = {VARIABLES[i]: e for i, e in enumerate(monom) if e}
        terms.append((_to_fraction(c), _monomial_str(powers)))
    return _format_terms(terms)


T = RationalFunction.symbol("t")
S = RationalFunction.symbol("s")
U = RationalFunction.symbol("u")
MS = RationalFunction.symbol("m_s")
MT = RationalFunction.symbol("m_t")
MU = RationalFunction.symbol("m_u")


def rf(value) -> RationalFunction:
    return value if isinstance(value, RationalFunction) else RationalFunction(value)


def field_arith(a, b, op: str) -> RationalFunction:
    a, b = rf(a), rf(b)
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise ValueError(f"unknown operation {op!r}")


# ---------------------------------------------------------------------------
# matrices over the field


class RFMatrix:
    """Dense rectangular matrix of rational functions."""

    __slots__ = ("entries",)

    def __init__(self, rows: Iterable[Iterable]):
        entries = tuple(tuple(rf(x) for x in row) for row in rows)
        if entries and len({len(r) for r in entries}) != 1:
            raise ShapeMismatch("ragged matrix")
        self.entries = entries

    @classmethod
    def identity(cls, n: int) -> "RFMatrix":
        return cls([[1 if i == j else 0 for j in range(n)] for i in range(n)])

    @property
    def rows(self) -> int:
        return len(self.entries)

    @property
    def cols(self) -> int:
        return len(self.entries[0]) if self.entries else 0

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def row(self, i: int) -> tuple[RationalFunction, ...]:
        return self.entries[i]

    def __eq__(self, other):
        return isinstance(other, RFMatrix) and self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    def __matmul__(self, other):
        if isinstance(other, RFMatrix):
            if self.cols != other.rows:
                raise ShapeMismatch(f"{self.rows}x{self.cols} @ {other.rows}x{other.cols}")
            return RFMatrix(
                [
                    [_dot(self.entries[i], [other.entries[k][j] for k in range(other.rows)]) for j in range(other.cols)]
                    for i in range(self.rows)
                ]
            )
        vec = [rf(v) for v in other]
        if len(vec) != self.cols:
            raise ShapeMismatch(f"{self.rows}x{self.cols} @ vector of length {len(vec)}")
        return [_dot(r, vec) for r in self.entries]

    def subs(self, mapping: Mapping[str, object] | None = None, **kw) -> "RFMatrix":
        return RFMatrix([[x.subs(mapping, **kw) for x in r] for r in self.entries])

    def is_lower_triangular(self) -> bool:
        return all(self.entries[i][j].is_zero() for i in range(self.rows) for j in range(i + 1, self.cols))

    def __str__(self):
        return "[" + ",\n ".join("[" + ", ".join(str(x) for x in r) + "]" for r in self.entries) + "]"

    def __repr__(self):
        return f"RFMatrix({self.rows}x{self.cols})"


def _dot(a: Sequence[RationalFunction], b: Sequence[RationalFunction]) -> RationalFunction:
    acc = RationalFunction(0)
    for x, y in zip(a, b):
        if x and y:
            acc = acc + x * y
    return acc


def _clear_denominators(row: Sequence[RationalFunction]) -> tuple[list[RationalFunction], RationalFunction]:
    """Scale a row by the lcm of its denominators; returns (row, scale)."""
    scale = RationalFunction(1)
    for x in row:
        if not x.is_polynomial():
            d = x.denominator()
            if not (scale / d).is_polynomial():
                scale = scale * d / _poly_gcd(scale, d)
    return [x * scale for x in row], scale


def _poly_gcd(a: RationalFunction, b: RationalFunction) -> RationalFunction:
    return RationalFunction._wrap(_FIELD(a._f.numer.gcd(b._f.numer)))


def _bareiss(mat: list[list[RationalFunction]], ncols_pivot: int) -> tuple[list[list[RationalFunction]], int, bool]:
    """In-place fraction-free elimination on the first ``ncols_pivot`` columns.

    Returns the reduced matrix, the permutation sign, and whether a full set of
    pivots was found.  With polynomial input every division is exact.
    """
    n = len(mat)
    sign = 1
    prev = RationalFunction(1)
    for k in range(min(n, ncols_pivot)):
        p = next((i for i in range(k, n) if not mat[i][k].is_zero()), None)
        if p is None:
            return mat, sign, False
        if p != k:
            mat[k], mat[p] = mat[p], mat[k]
            sign = -sign
        pivot = mat[k][k]
        for i in range(k + 1, n):
            lead = mat[i][k]
            row_i, row_k = mat[i], mat[k]
            for j in range(k + 1, len(row_i)):
                row_i[j] = (pivot * row_i[j] - lead * row_k[j]) / prev
            row_i[k] = RationalFunction(0)
        prev = pivot
    return mat, sign, True


def determinant(A: RFMatrix) -> RationalFunction:
    if A.rows != A.cols:
        raise ShapeMismatch("determinant of a non-square matrix")
    if A.rows == 0:
        return RationalFunction(1)
    scale = RationalFunction(1)
    cleared = []
    for r in A.entries:
        c, k = _clear_denominators(r)
        scale = scale * k
        cleared.append(c)
    mat, sign, full = _bareiss(cleared, A.cols)
    if not full:
        return RationalFunction(0)
    return sign * mat[-1][-1] / scale


def solve_linear(A: RFMatrix, b: Sequence, at: Mapping[str, object] | None = None) -> list[RationalFunction]:
    """Solve ``A x = b`` exactly.

    With ``at`` the system is first checked to be generically nonsingular and
    then solved after substituting the given point; a vanishing determinant at
    that point raises :class:`DegenerateAtPoint`.
    """
    if A.rows != A.cols:
        raise ShapeMismatch("solve_linear needs a square matrix")
    if len(b) != A.rows:
        raise ShapeMismatch("right-hand side has the wrong length")
    if at:
        if determinant(A).is_zero():
            raise SingularSystem("determinant vanishes identically")
        A = A.subs(at)
        b = [rf(x).subs(at) for x in b]
        try:
            return solve_linear(A, b)
        except SingularSystem:
            raise DegenerateAtPoint(f"determinant vanishes at {dict(at)}") from None
    n = A.rows
    aug = [_clear_denominators(list(A.entries[i]) + [rf(b[i])])[0] for i in range(n)]
    mat, _, full = _bareiss(aug, n)
    if not full or mat[n - 1][n - 1].is_zero():
        raise SingularSystem("determinant vanishes identically")
    x = [RationalFunction(0)] * n
    for i in range(n - 1, -1, -1):
        acc = mat[i][n]
        for j in range(i + 1, n):
            if not mat[i][j].is_zero():
                acc = acc - mat[i][j] * x[j]
        x[i] = acc / mat[i][i]
    return x


def leading_principal_minors(rows: Sequence[Sequence]) -> list[Fraction]:
    """Leading principal minors ``D_1..D_n`` of a rational square matrix.

    Fraction-free elimination without pivoting produces them as successive
    pivots.  Stops early (returning the minors found so far plus the offending
    zero) once a minor vanishes, since later pivots are then undefined.
    """
    mat = [[as_rational(x) for x in r] for r in rows]
    n = len(mat)
    minors: list[Fraction] = []
    prev = Fraction(1)
    for k in range(n):
        pivot = mat[k][k]
        minors.append(pivot)
        if pivot == 0:
            break
        for i in range(k + 1, n):
            lead = mat[i][k]
            for j in range(k + 1, n):
                mat[i][j] = (pivot * mat[i][j] - lead * mat[k][j]) / prev
        prev = pivot
    return minors
