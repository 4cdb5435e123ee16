from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike

from ..core import ACT_TOL, INF, FloatArray, RegularizerOracle, SubspaceBasis
from ._common import check_positive, require_dual_feasible, vector


def nonneg_l1_prox(v: ArrayLike, t: float, lam: float = 1.0) -> FloatArray:
    """Projection of the soft-thresholded point onto the nonnegative orthant."""
    threshold = check_positive("t", t) * check_positive("lambda", lam)
    return np.maximum(vector(v, "v") - threshold, 0.0)


def nonneg_l1_dual_violation(z: ArrayLike, lam: float = 1.0) -> float:
    vec = vector(z)
    if vec.size == 0:
        return 0.0
    return max(float(np.max(vec)) - lam, 0.0)


def nonneg_l1_effective_subspace(z: ArrayLike, lam: float = 1.0) -> SubspaceBasis:
    lam = check_positive("lambda", lam)
    vec = vector(z)
    require_dual_feasible("nonneg_l1", nonneg_l1_dual_violation(vec, lam), lam)
    return SubspaceBasis.coordinate(vec.size, np.flatnonzero(vec >= lam * (1.0 - ACT_TOL)))


class NonnegL1Reg(RegularizerOracle):
    """lambda * sum(x) on the nonnegative orthant, +inf elsewhere."""

    kind = "nonneg_l1"

    def __init__(self, lam: float = 1.0, n: int | None = None) -> None:
        super().__init__(lam, n)

    def _base_value(self, x: FloatArray) -> float:
        if np.any(x < 0.0):
            return INF
        return float(np.sum(x))

    def _base_prox(self, v: FloatArray, t: float) -> FloatArray:
        return nonneg_l1_prox(v, t)

    def _base_dual_violation(self, z: FloatArray) -> float:
        return nonneg_l1_dual_violation(z)

    def _base_effective_subspace(self, z: FloatArray) -> SubspaceBasis:
        return SubspaceBasis.coordinate(z.size, np.flatnonzero(z >= 1.0 - ACT_TOL))
