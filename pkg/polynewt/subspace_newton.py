"""Newton step restricted to an effective subspace.

The subproblem min_{d in L} 0.5 <Hd, d> - <rhs, d> is solved through its reduced
r x r system B^T H B c = B^T rhs with d = B c, where B is the orthonormal basis of L.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np
import scipy.linalg
import structlog
from numpy.typing import ArrayLike
from scipy.sparse.linalg import LinearOperator, aslinearoperator

from .core import FloatArray, SubspaceBasis, as_vector
from .errors import NewtonPostconditionError, NonSymmetricHessianError

logger = structlog.get_logger(__name__)

SINGULAR_RATIO = 1e-12
TIKHONOV_FACTOR = 1e-10
SYMMETRY_TOL = 1e-8
RESIDUAL_TOL = 1e-8
SPAN_TOL = 1e-10
WELL_CONDITIONED = 1e8


class Fallback(str, Enum):
    NONE = "none"
    TIKHONOV = "tikhonov"
    SKIPPED = "skipped"


@dataclass(frozen=True, eq=False)
class NewtonStepReport:
    direction: FloatArray
    reduced_dim: int
    reduced_condition: float
    residual_in_Lperp: float
    fallback_used: Fallback

    def to_dict(self) -> dict[str, object]:
        return {
            "reduced_dim": self.reduced_dim,
            "reduced_condition": self.reduced_condition,
            "residual_in_Lperp": self.residual_in_Lperp,
            "fallback_used": self.fallback_used.value,
        }


HessianLike = Union[FloatArray, LinearOperator]


def _operator(hess: HessianLike | ArrayLike, n: int) -> LinearOperator:
    op = hess if isinstance(hess, LinearOperator) else aslinearoperator(np.asarray(hess, float))
    if op.shape != (n, n):
        raise ValueError(f"Hessian has shape {op.shape}, expected {(n, n)}")
    return op


def newton_direction(
    hess: HessianLike | ArrayLike, rhs: ArrayLike, L: SubspaceBasis
) -> NewtonStepReport:
    vec = as_vector(rhs, name="rhs")
    n = vec.size
    if L.n != n:
        raise ValueError(f"subspace lives in dimension {L.n}, rhs has length {n}")
    op = _operator(hess, n)
    r = L.r
    if r == 0:
        return NewtonStepReport(np.zeros(n), 0, 1.0, 0.0, Fallback.NONE)

    B = L.basis
    HB = np.asarray(op.matmat(B), dtype=np.float64).reshape(n, r)
    reduced = B.T @ HB
    asymmetry = float(np.max(np.abs(reduced - reduced.T)))
    if asymmetry > SYMMETRY_TOL * max(1.0, float(np.max(np.abs(reduced)))):
        raise NonSymmetricHessianError(f"reduced Hessian asymmetric by {asymmetry:.3e}")
    reduced = 0.5 * (reduced + reduced.T)
    g_r = B.T @ vec

    eigenvalues = scipy.linalg.eigvalsh(reduced)
    smallest, largest = float(eigenvalues[0]), float(eigenvalues[-1])
    fallback = Fallback.NONE
    system = reduced
    if largest <= 0.0 or smallest < SINGULAR_RATIO * largest:
        trace = float(np.trace(reduced))
        mu = TIKHONOV_FACTOR * trace / r
        fallback = Fallback.TIKHONOV
        system = reduced + mu * np.eye(r)
        logger.debug("newton_tikhonov_shift", mu=mu, smallest=smallest, largest=largest)
        if not mu > 0.0:
            return _skipped(n, r)
    condition = largest / smallest if smallest > 0.0 else float("inf")

    try:
        factor = scipy.linalg.cho_factor(system, lower=True)
        coeffs = scipy.linalg.cho_solve(factor, g_r)
    except (np.linalg.LinAlgError, ValueError):
        return _skipped(n, r)
    if not np.all(np.isfinite(coeffs)):
        return _skipped(n, r)

    direction = B @ coeffs
    residual = float(np.linalg.norm(g_r - B.T @ (HB @ coeffs)))
    off_subspace = float(np.linalg.norm(B @ (B.T @ direction) - direction))
    if off_subspace > SPAN_TOL * max(float(np.linalg.norm(direction)), np.finfo(float).tiny):
        raise NewtonPostconditionError(
            f"direction leaves the subspace by {off_subspace:.3e}",
            off_subspace=off_subspace,
            residual=residual,
        )
    bound = RESIDUAL_TOL * (1.0 + float(np.linalg.norm(vec)))
    if fallback is Fallback.NONE and residual > bound:
        if condition <= WELL_CONDITIONED:
            raise NewtonPostconditionError(
                f"reduced residual {residual:.3e} exceeds {bound:.3e}",
                off_subspace=off_subspace,
                residual=residual,
            )
        # ill-conditioned reduced system, residual is roundoff
        logger.warning("newton_residual_too_large", residual=residual, condition=condition)
        return _skipped(n, r)
    return NewtonStepReport(direction, r, condition, residual, fallback)


def _skipped(n: int, r: int) -> NewtonStepReport:
    logger.debug("newton_step_skipped", reduced_dim=r)
    return NewtonStepReport(np.zeros(n), r, float("inf"), 0.0, Fallback.SKIPPED)


def certify_optimality_system(
    hess: HessianLike | ArrayLike,
    rhs: ArrayLike,
    L: SubspaceBasis,
    d: ArrayLike,
    *,
    tol: float = SPAN_TOL,
) -> bool:
    """d lies in L and H d - rhs is orthogonal to L."""
    vec = as_vector(rhs, name="rhs")
    direction = as_vector(d, vec.size, name="d")
    op = _operator(hess, vec.size)
    B = L.basis
    off_subspace = float(np.linalg.norm(B @ (B.T @ direction) - direction))
    if off_subspace > tol * max(1.0, float(np.linalg.norm(direction))):
        return False
    projected = B.T @ (vec - op.matvec(direction))
    return float(np.linalg.norm(projected)) <= RESIDUAL_TOL * (1.0 + float(np.linalg.norm(vec)))


__all__ = [
    "Fallback",
    "NewtonStepReport",
    "certify_optimality_system",
    "newton_direction",
]
