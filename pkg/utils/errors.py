# utils/errors.py
"""Exception hierarchy shared by the services and the CLI.

The CLI maps each family to an exit code (see app.py).
"""
from __future__ import annotations

from typing import Optional, Sequence


class ZeroCorrError(Exception):
    """Base class for every error raised on purpose by this package."""


class DomainError(ZeroCorrError, ValueError):
    """Argument outside the domain of an operation."""


class CoincidentConfigurationError(DomainError):
    """Gram matrix is (numerically) rank deficient: two points coincide."""

    def __init__(self, index: int, pivot: float, tolerance: float) -> None:
        self.index = index
        self.pivot = pivot
        self.tolerance = tolerance
        super().__init__(
            f"rank-deficient Gram matrix at row {index}: "
            f"xi_jj^2 = {pivot:.3e} < {tolerance:.1e} (coincident points)"
        )


class GridTooCoarseError(DomainError):
    def __init__(self, message: str, required_step: float) -> None:
        self.required_step = required_step
        super().__init__(f"{message}; required grid spacing <= {required_step:.3e}")


class InsufficientSamplesError(DomainError):
    pass


class ConvergenceError(ZeroCorrError, RuntimeError):
    """Numerical non-convergence (quadrature or root finding)."""

    def __init__(
        self,
        message: str,
        error_estimate: Optional[float] = None,
        residuals: Optional[Sequence[float]] = None,
    ) -> None:
        self.error_estimate = error_estimate
        self.residuals = None if residuals is None else list(residuals)
        super().__init__(message)


class DegenerateLeadingCoefficientError(ConvergenceError):
    pass


class ConfigValidationError(ZeroCorrError, ValueError):
    def __init__(self, field: str, message: str) -> None:
        self.field = field
        super().__init__(f"invalid '{field}': {message}")


class AcceptanceFailure(ZeroCorrError, RuntimeError):
    """A statistical / numerical acceptance criterion failed in self-test mode."""
