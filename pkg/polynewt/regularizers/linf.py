from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike

from ..core import ACT_TOL, FloatArray, RegularizerOracle, SubspaceBasis
from ._common import check_positive, require_dual_feasible, vector


def project_l1_ball(v: ArrayLike, radius: float) -> FloatArray:
    """Euclidean projection onto {w : ||w||_1 <= radius} by sorting."""
    radius = check_positive("radius", radius)
    vec = vector(v, "v")
    magnitude = np.abs(vec)
    if float(magnitude.sum()) <= radius:
        return vec.copy()
    u = np.sort(magnitude)[::-1]
    cssv = np.cumsum(u)
    ranks = np.arange(1, vec.size + 1)
    rho = np.nonzero(u * ranks > (cssv - radius))[0][-1]
    theta = (cssv[rho] - radius) / (rho + 1.0)
    return np.sign(vec) * np.maximum(magnitude - theta, 0.0)


def linf_prox(v: ArrayLike, t: float, lam: float = 1.0) -> FloatArray:
    """v minus its projection onto the (t * lam)-radius l1 ball."""
    radius = check_positive("t", t) * check_positive("lambda", lam)
    vec = vector(v, "v")
    if float(np.abs(vec).sum()) <= radius:
        return np.zeros_like(vec)
    return vec - project_l1_ball(vec, radius)


def linf_dual_violation(z: ArrayLike, lam: float = 1.0) -> float:
    return max(float(np.abs(vector(z)).sum()) - lam, 0.0)


def _linf_subspace_unscaled(z: FloatArray) -> SubspaceBasis:
    n = z.size
    if float(np.abs(z).sum()) < 1.0 - ACT_TOL:
        # interior of the ball: the normal cone is {0}
        return SubspaceBasis.zero(n)
    zero_idx = np.abs(z) <= ACT_TOL
    generators = [np.eye(n)[:, zero_idx]]
    if not np.all(zero_idx):
        sign_vector = np.where(zero_idx, 0.0, np.sign(z))
        generators.append(sign_vector[:, None])
    return SubspaceBasis.from_spanning_set(np.hstack(generators), n)


def linf_effective_subspace(z: ArrayLike, lam: float = 1.0) -> SubspaceBasis:
    """Span of e_i over vanishing z_i plus the sign vector of the remaining entries.

    Points strictly inside the lambda-scaled l1 ball have the zero subspace.
    """
    lam = check_positive("lambda", lam)
    vec = vector(z)
    require_dual_feasible("linf", linf_dual_violation(vec, lam), lam)
    return _linf_subspace_unscaled(vec / lam)


class LInfReg(RegularizerOracle):
    kind = "linf"

    def __init__(self, lam: float = 1.0, n: int | None = None) -> None:
        super().__init__(lam, n)

    def _base_value(self, x: FloatArray) -> float:
        return float(np.max(np.abs(x))) if x.size else 0.0

    def _base_prox(self, v: FloatArray, t: float) -> FloatArray:
        return linf_prox(v, t)

    def _base_dual_violation(self, z: FloatArray) -> float:
        return linf_dual_violation(z)

    def _base_effective_subspace(self, z: FloatArray) -> SubspaceBasis:
        return _linf_subspace_unscaled(z)
