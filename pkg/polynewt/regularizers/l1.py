from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike

from ..core import ACT_TOL, FloatArray, RegularizerOracle, SubspaceBasis
from ._common import check_positive, require_dual_feasible, vector


def l1_prox(v: ArrayLike, t: float, lam: float = 1.0) -> FloatArray:
    """Soft thresholding at t * lam."""
    threshold = check_positive("t", t) * check_positive("lambda", lam)
    vec = vector(v, "v")
    return np.sign(vec) * np.maximum(np.abs(vec) - threshold, 0.0)


def l1_dual_violation(z: ArrayLike, lam: float = 1.0) -> float:
    vec = vector(z)
    if vec.size == 0:
        return 0.0
    return max(float(np.max(np.abs(vec))) - lam, 0.0)


def l1_effective_subspace(z: ArrayLike, lam: float = 1.0) -> SubspaceBasis:
    """Coordinate subspace of the entries where |z_i| reaches lambda."""
    lam = check_positive("lambda", lam)
    vec = vector(z)
    require_dual_feasible("l1", l1_dual_violation(vec, lam), lam)
    active = np.flatnonzero(np.abs(vec) >= lam * (1.0 - ACT_TOL))
    return SubspaceBasis.coordinate(vec.size, active)


class L1Reg(RegularizerOracle):
    """lambda * ||x||_1; conjugate is the indicator of the lambda-scaled infinity ball."""

    kind = "l1"

    def __init__(self, lam: float = 1.0, n: int | None = None) -> None:
        super().__init__(lam, n)

    def _base_value(self, x: FloatArray) -> float:
        return float(np.sum(np.abs(x)))

    def _base_prox(self, v: FloatArray, t: float) -> FloatArray:
        return l1_prox(v, t)

    def _base_dual_violation(self, z: FloatArray) -> float:
        return l1_dual_violation(z)

    def _base_effective_subspace(self, z: FloatArray) -> SubspaceBasis:
        active = np.flatnonzero(np.abs(z) >= 1.0 - ACT_TOL)
        return SubspaceBasis.coordinate(z.size, active)
