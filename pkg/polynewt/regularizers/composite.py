"""Effective subspace of g = h o K through the conjugate composition rule."""

from __future__ import annotations

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike

from ..core import DUAL_TOL, FloatArray, RegularizerOracle, SubspaceBasis
from ..errors import DualInfeasibleError
from ._common import vector


def _intersect(first: FloatArray, second: FloatArray, dim: int) -> FloatArray:
    """Spanning set of span(first) intersected with span(second)."""
    if first.shape[1] == 0 or second.shape[1] == 0:
        return np.zeros((dim, 0))
    coeffs = scipy.linalg.null_space(np.hstack([first, -second]))
    return first @ coeffs[: first.shape[1]]


def composite_effective_subspace(
    K: ArrayLike,
    inner: RegularizerOracle,
    z: ArrayLike,
    y: ArrayLike | None = None,
) -> SubspaceBasis:
    """Preimage under K of the inner effective subspace at a dual certificate y.

    y must satisfy K^T y = z and lie in dom h*. When it is omitted the minimum
    norm solution of K^T y = z is used; if K^T has a nontrivial kernel and that
    solution is infeasible, the caller has to supply y.
    """
    matrix = np.asarray(K.toarray() if hasattr(K, "toarray") else K, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError("K must be a matrix")
    m, n = matrix.shape
    vec = vector(z)
    if vec.size != n:
        raise ValueError(f"z must have length {n}, got {vec.size}")

    scale = max(1.0, float(np.linalg.norm(vec)))
    if y is None:
        cert, *_ = np.linalg.lstsq(matrix.T, vec, rcond=None)
    else:
        cert = vector(y, "y")
        if cert.size != m:
            raise ValueError(f"y must have length {m}, got {cert.size}")
    mismatch = float(np.linalg.norm(matrix.T @ cert - vec))
    if mismatch > DUAL_TOL * 10 * scale * max(1.0, np.sqrt(n)):
        raise DualInfeasibleError(
            f"z is not in the range of K^T (mismatch {mismatch:.3e})", violation=mismatch
        )
    if not inner.dual_domain_check(cert):
        violation = inner.dual_violation(cert)
        if y is None and scipy.linalg.null_space(matrix.T).shape[1] > 0:
            raise DualInfeasibleError(
                "minimum-norm certificate infeasible and K^T has a kernel; supply y",
                violation=violation,
            )
        raise DualInfeasibleError(
            f"certificate outside dom h* (violation {violation:.3e})", violation=violation
        )

    inner_basis = inner.effective_subspace(cert).basis
    image = scipy.linalg.orth(matrix) if np.any(matrix) else np.zeros((m, 0))
    lifted = np.linalg.pinv(matrix) @ _intersect(inner_basis, image, m)
    kernel = scipy.linalg.null_space(matrix)
    return SubspaceBasis.from_spanning_set(np.hstack([kernel, lifted]), n)
