"""Exception types raised across the toolkit."""

from __future__ import annotations

from typing import Any


class PolyNewtError(Exception):
    """Base class for every error raised by polynewt."""


class ConfigError(PolyNewtError, ValueError):
    """Invalid configuration, suite definition or problem instance."""


class DualInfeasibleError(PolyNewtError, ValueError):
    """A dual point lies outside dom g* beyond tolerance."""

    def __init__(self, message: str, *, violation: float) -> None:
        super().__init__(message)
        self.violation = violation


class DomainError(PolyNewtError, ValueError):
    """A point lies outside the open domain of the smooth loss."""


class StepSizeError(PolyNewtError):
    """Backtracking ran out of halvings."""


class NonSymmetricHessianError(PolyNewtError, ValueError):
    """The reduced Hessian is not symmetric, so the Hessian oracle is broken."""


class NewtonPostconditionError(PolyNewtError):
    """A Newton direction failed its subspace or optimality-system check."""

    def __init__(self, message: str, *, off_subspace: float, residual: float) -> None:
        super().__init__(message)
        self.off_subspace = off_subspace
        self.residual = residual


class InsufficientTailError(PolyNewtError):
    """Too few Newton tail points to fit a convergence order."""

    def __init__(self, message: str, *, available: int) -> None:
        super().__init__(message)
        self.available = available


class NonStationaryError(PolyNewtError, ValueError):
    """A tilt-stability candidate is materially non-stationary."""


class ReferenceNotConvergedError(PolyNewtError):
    """The reference solver exhausted its iteration budget."""

    def __init__(self, message: str, *, best_x: Any, residual: float) -> None:
        super().__init__(message)
        self.best_x = best_x
        self.residual = residual


__all__ = [
    "ConfigError",
    "DomainError",
    "DualInfeasibleError",
    "InsufficientTailError",
    "NewtonPostconditionError",
    "NonStationaryError",
    "NonSymmetricHessianError",
    "PolyNewtError",
    "ReferenceNotConvergedError",
    "StepSizeError",
]
