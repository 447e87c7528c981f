"""Exception hierarchy shared by every layer of the package."""

from __future__ import annotations


class PolymartError(Exception):
    """Base class for all package errors."""


class DivisionByZeroFunction(PolymartError, ZeroDivisionError):
    pass


class SingularSystem(PolymartError):
    pass


class DegenerateAtPoint(PolymartError):
    pass


class ShapeMismatch(PolymartError, ValueError):
    pass


class UnknownModel(PolymartError, ValueError):
    pass


class InvalidParameter(PolymartError, ValueError):
    pass


class ModelSyntaxError(PolymartError, ValueError):
    """Raised by the model-file parser; carries 1-based line and column."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


class MomentInfeasible(PolymartError, ValueError):
    def __init__(self, t, minor: int, value=None):
        msg = f"Hankel minor {minor} is not positive at t={t}"
        if value is not None:
            msg += f" (value {value})"
        super().__init__(msg)
        self.t = t
        self.minor = minor
        self.value = value


class MissingOrder(PolymartError, ValueError):
    def __init__(self, n: int):
        super().__init__(f"moment order {n} is missing")
        self.n = n


class OrderOutOfRange(PolymartError, ValueError):
    pass


class InsufficientMoments(PolymartError, ValueError):
    pass


class NonPolynomialTime(PolymartError, ValueError):
    pass


class TimeOrderViolation(PolymartError, ValueError):
    pass


class CertificationFailed(PolymartError):
    def __init__(self, n: int, residual):
        super().__init__(f"martingale identity fails for M_{n}: residual {residual}")
        self.n = n
        self.residual = residual


class NotConstant(PolymartError):
    def __init__(self, order: int, coefficient):
        super().__init__(
            f"recombination coefficient at order {order} depends on time: {coefficient}"
        )
        self.order = order
        self.coefficient = coefficient


class HypothesisViolated(PolymartError):
    pass


class DegenerateTriple(PolymartError):
    pass


class InvalidGrid(PolymartError, ValueError):
    pass


class GridMismatch(PolymartError, ValueError):
    pass


class DegenerateVariance(PolymartError):
    pass
