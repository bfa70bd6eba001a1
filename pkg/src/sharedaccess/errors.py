"""Exception types shared across the package."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class InvalidParameter:
    """One violated invariant: which field and why."""

    field: str
    reason: str

    def __str__(self) -> str:
        return f"{self.field}: {self.reason}"


class ValidationError(ValueError):
    """Raised with *every* violated invariant, not just the first."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class DomainError(ValueError):
    """Argument outside a function's mathematical domain."""


class QuadratureFailure(RuntimeError):
    """Numerical integration could not reach the requested tolerance."""


class Unstable(RuntimeError):
    """Queue analysis requested for an unstable parameterization."""


class DegenerateXi(ArithmeticError):
    """Closed form invalid because xi is too close to 1; use the summation path."""


class ZeroArrival(ValueError):
    """Delay is undefined for a zero arrival rate."""


class PowerRatioViolation(ValueError):
    """Secondary/primary power ratio outside the closed-form optimizer's regime."""


class NoFeasiblePoint(RuntimeError):
    """The feasible region is empty."""


class InvalidArrival(ValueError):
    """Arrival rate incompatible with any stable operating point."""
