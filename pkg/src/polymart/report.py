"""Check verdicts and their JSON form."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from .algebra import RationalFunction

VERDICTS = ("pass", "fail", "degenerate", "not-applicable")


def exact_str(value: Any) -> str:
    """Canonical exact string: ``p/q`` for rationals, canonical form otherwise."""
    if isinstance(value, RationalFunction) and value.is_constant():
        value = value.constant()
    if isinstance(value, (int, Fraction)) and not isinstance(value, bool):
        return str(Fraction(value))
    return str(value)


@dataclass
class CheckReport:
    check: str
    verdict: str
    constants: dict[str, Any] = field(default_factory=dict)
    residuals: dict[str, Any] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    # finer grading for checks with more than one pass level (harness)
    level: str | None = None

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def residuals_vanish(self) -> bool:
        return all(RationalFunction(r).is_zero() if not isinstance(r, str) else r == "0"
                   for r in self.residuals.values())

    def to_dict(self) -> dict[str, Any]:
        out = {
            "check": self.check,
            "verdict": self.verdict,
            "constants": {k: exact_str(v) for k, v in self.constants.items()},
            "residuals": {k: exact_str(v) for k, v in self.residuals.items()},
            "notes": list(self.notes),
        }
        if self.level is not None:
            out["level"] = self.level
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)
