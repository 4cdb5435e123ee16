from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike

from ..core import DUAL_TOL, FloatArray, as_vector
from ..errors import DualInfeasibleError


def check_positive(name: str, value: float) -> float:
    number = float(value)
    if not number > 0.0 or not np.isfinite(number):
        raise ValueError(f"{name} must be positive, got {value}")
    return number


def require_dual_feasible(kind: str, violation: float, lam: float) -> None:
    if violation > DUAL_TOL * (1.0 + lam):
        raise DualInfeasibleError(
            f"{kind}: dual point outside dom g* (violation {violation:.3e})",
            violation=violation,
        )


def vector(x: ArrayLike, name: str = "z") -> FloatArray:
    return as_vector(x, name=name)
