"""Exception hierarchy and violation records shared by every rmode_sim module."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence


@dataclass(frozen=True)
class Violation:
    """One broken invariant: which field, what value, which constraint."""

    field: str
    value: Any
    constraint: str

    def __str__(self) -> str:
        return f"{self.field}={self.value!r} violates: {self.constraint}"

    def as_dict(self) -> dict[str, Any]:
        value = self.value if isinstance(self.value, (int, float, str, bool, type(None))) else repr(self.value)
        return {"field": self.field, "value": value, "constraint": self.constraint}


class RModeError(Exception):
    """Root of all simulator errors."""


class ConfigurationError(RModeError, ValueError):
    """A configuration cannot be used as given (e.g. Nyquist violation)."""


class ScenarioValidationError(ConfigurationError):
    """A scenario file failed to load or violates one or more invariants."""

    def __init__(self, violations: Sequence[Violation], source: str | Path | None = None):
        self.violations = list(violations)
        self.source = source
        where = f" in {source}" if source else ""
        lines = "; ".join(str(v) for v in self.violations) or "no details"
        super().__init__(f"{len(self.violations)} scenario violation(s){where}: {lines}")


class AlignmentError(RModeError, ValueError):
    """Two buffers disagree on sample rate, start time or length."""

    def __init__(self, field: str, left: object, right: object):
        self.field = field
        super().__init__(f"buffers are not aligned: {field} {left!r} != {right!r}")


class DomainError(RModeError, ValueError):
    """An argument lies outside the domain of the operation."""


class SizeError(RModeError, ValueError):
    """A buffer is too short for the requested operation."""


class UnderrunError(RModeError):
    """The payload does not hold enough bits for the requested duration."""


class EstimationError(RModeError):
    """A measurement cannot be made reliably from the given window."""


class DegenerateSignalError(RModeError):
    """A zero-power signal was given where a power reference is required."""


class OutputError(RModeError, OSError):
    """Writing or reading a run artifact failed."""

    def __init__(self, path: str | Path, reason: object):
        self.path = Path(path)
        super().__init__(f"I/O failure on {self.path}: {reason}")


__all__ = [
    "Violation",
    "RModeError",
    "ConfigurationError",
    "ScenarioValidationError",
    "AlignmentError",
    "DomainError",
    "SizeError",
    "UnderrunError",
    "EstimationError",
    "DegenerateSignalError",
    "OutputError",
]
