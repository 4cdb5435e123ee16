"""Smooth fidelity terms: least squares and the Poisson Kullback-Leibler loss."""

from __future__ import annotations

import math
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sparse
import structlog
from numpy.typing import ArrayLike
from scipy.sparse.linalg import LinearOperator, aslinearoperator
from scipy.special import xlogy

from .core import FloatArray, SmoothLossOracle, as_vector
from .errors import ConfigError, DomainError

logger = structlog.get_logger(__name__)

KL_DOMAIN_MARGIN = 1e-12
POWER_ITERATION_TOL = 1e-10


def power_iteration(
    apply: Callable[[FloatArray], FloatArray],
    n: int,
    *,
    tol: float = POWER_ITERATION_TOL,
    max_iter: int = 100_000,
) -> float:
    """Largest eigenvalue of a symmetric PSD operator."""
    v = np.linspace(1.0, 2.0, n)
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(max_iter):
        w = apply(v)
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        updated = float(np.dot(v, w))
        v = w / norm
        if abs(updated - estimate) <= tol * abs(updated):
            return updated
        estimate = updated
    logger.warning("power_iteration_budget_exhausted", estimate=estimate, n=n)
    return estimate


class LeastSquaresLoss(SmoothLossOracle):
    """f(x) = 0.5 * ||Ax - b||^2."""

    def __init__(self, A: ArrayLike, b: ArrayLike) -> None:
        matrix = np.array(A, dtype=np.float64)
        if matrix.ndim != 2:
            raise ConfigError("A must be a matrix")
        rhs = as_vector(b, matrix.shape[0], name="b").copy()
        matrix.setflags(write=False)
        rhs.setflags(write=False)
        self.A = matrix
        self.b = rhs
        self.m, self.n = matrix.shape

    @cached_property
    def gram(self) -> FloatArray:
        gram = self.A.T @ self.A
        gram = 0.5 * (gram + gram.T)
        gram.setflags(write=False)
        return gram

    @cached_property
    def atb(self) -> FloatArray:
        atb = self.A.T @ self.b
        atb.setflags(write=False)
        return atb

    @cached_property
    def _lipschitz(self) -> float:
        return power_iteration(lambda v: self.A.T @ (self.A @ v), self.n)

    @property
    def lipschitz_grad_hint(self) -> float | None:
        value = self._lipschitz
        return value if value > 0.0 else None

    def residual(self, x: FloatArray) -> FloatArray:
        return self.A @ x - self.b

    def value(self, x: FloatArray) -> float:
        r = self.residual(x)
        return 0.5 * float(np.dot(r, r))

    def gradient(self, x: FloatArray) -> FloatArray:
        return ls_gradient(self, x)

    def hessian(self, x: FloatArray) -> FloatArray:
        return self.gram

    def hess_vec(self, x: FloatArray, v: FloatArray) -> FloatArray:
        return self.gram @ v

    def hessian_operator(self, x: FloatArray) -> LinearOperator:
        return aslinearoperator(self.gram)


def ls_gradient(loss: LeastSquaresLoss, x: ArrayLike) -> FloatArray:
    vec = as_vector(x, loss.n)
    return loss.A.T @ (loss.A @ vec - loss.b)


def _reflect(index: np.ndarray, size: int) -> np.ndarray:
    # half-sample symmetric extension: d c b a | a b c d | d c b a
    period = np.mod(index, 2 * size)
    return np.where(period >= size, 2 * size - 1 - period, period)


def fwhm_to_sigma(fwhm: float) -> float:
    return float(fwhm) / (2.0 * math.sqrt(2.0 * math.log(2.0)))


def _psf_matrix_1d(size: int, sigma: float) -> sparse.csr_matrix:
    """Column j is the Gaussian spread of a point at j, folded back at the borders."""
    if sigma <= 0.0:
        return sparse.identity(size, format="csr")
    radius = max(1, int(math.ceil(4.0 * sigma)))
    offsets = np.arange(-radius, radius + 1)
    kernel = np.exp(-0.5 * (offsets / sigma) ** 2)
    kernel /= kernel.sum()
    cols = np.repeat(np.arange(size), offsets.size)
    rows = _reflect(cols + np.tile(offsets, size), size)
    vals = np.tile(kernel, size)
    matrix = sparse.coo_matrix((vals, (rows, cols)), shape=(size, size)).tocsr()
    matrix.eliminate_zeros()
    return matrix


def _block_sum_1d(size: int, q: int) -> sparse.csr_matrix:
    rows = np.arange(size) // q
    return sparse.csr_matrix(
        (np.ones(size), (rows, np.arange(size))), shape=(size // q, size)
    )


def build_forward_model(
    n_side: int, q: int, fwhm: float
) -> tuple[sparse.csr_matrix, sparse.csr_matrix]:
    """Gaussian PSF H (n x n) and q x q block-sum downsampler M for an n_side^2 image.

    ``fwhm`` is in high-resolution pixels. Images are flattened row-major.
    """
    if n_side < 1 or q < 1:
        raise ConfigError("n_side and q must be positive")
    if n_side % q != 0:
        raise ConfigError(f"factor q={q} does not divide n_side={n_side}")
    if fwhm < 0.0:
        raise ConfigError("fwhm must be nonnegative")
    psf = _psf_matrix_1d(n_side, fwhm_to_sigma(fwhm))
    block = _block_sum_1d(n_side, q)
    H = sparse.kron(psf, psf, format="csr")
    M = sparse.kron(block, block, format="csr")
    return H, M


class PoissonKLLoss(SmoothLossOracle):
    """KL divergence between counts y and the intensity MHx + b."""

    def __init__(
        self,
        H: sparse.spmatrix | FloatArray,
        M: sparse.spmatrix | FloatArray,
        y: ArrayLike,
        background: ArrayLike | float,
        *,
        margin: float = KL_DOMAIN_MARGIN,
    ) -> None:
        forward = sparse.csr_matrix(sparse.csr_matrix(M) @ sparse.csr_matrix(H))
        self.H = sparse.csr_matrix(H)
        self.M = sparse.csr_matrix(M)
        self.forward = forward
        self.m, self.n = forward.shape
        counts = as_vector(y, self.m, name="y").copy()
        if np.any(counts < 0.0):
            raise ConfigError("counts must be nonnegative")
        b = np.broadcast_to(np.asarray(background, dtype=np.float64), (self.m,)).copy()
        if np.any(b <= 0.0):
            raise ConfigError("background must be strictly positive")
        counts.setflags(write=False)
        b.setflags(write=False)
        self.y = counts
        self.background = b
        self.margin = float(margin)
        self.geometry: tuple[int, int, float] | None = None

    @classmethod
    def from_geometry(
        cls,
        n_side: int,
        q: int,
        fwhm: float,
        y: ArrayLike,
        background: ArrayLike | float = 1.0,
    ) -> "PoissonKLLoss":
        H, M = build_forward_model(n_side, q, fwhm)
        loss = cls(H, M, y, background)
        loss.geometry = (int(n_side), int(q), float(fwhm))
        return loss

    def intensity(self, x: FloatArray) -> FloatArray:
        return self.forward @ x + self.background

    def domain_check(self, x: FloatArray) -> bool:
        if not np.all(np.isfinite(x)):
            return False
        return bool(np.all(self.intensity(x) > self.margin))

    def _checked_intensity(self, x: FloatArray) -> FloatArray:
        w = self.intensity(as_vector(x, self.n))
        if not np.all(w > self.margin):
            raise DomainError(
                f"intensity MHx + b below margin {self.margin:g} (min {float(np.min(w)):.3e})"
            )
        return w

    def value(self, x: FloatArray) -> float:
        return kl_value_grad(self, x)[0]

    def gradient(self, x: FloatArray) -> FloatArray:
        w = self._checked_intensity(x)
        return self.forward.T @ (1.0 - self.y / w)

    def hessian(self, x: FloatArray) -> FloatArray:
        w = self._checked_intensity(x)
        weighted = sparse.diags(self.y / w**2) @ self.forward
        hess = (self.forward.T @ weighted).toarray()
        return 0.5 * (hess + hess.T)

    def hess_vec(self, x: FloatArray, v: FloatArray) -> FloatArray:
        return kl_hessian_vec(self, x, v)

    def dense_operators(self) -> tuple[FloatArray, FloatArray]:
        if self.n > 64 * 64:
            raise ConfigError("explicit matrices are only built for n <= 64^2")
        return self.H.toarray(), self.M.toarray()


def kl_value_grad(loss: PoissonKLLoss, x: ArrayLike) -> tuple[float, FloatArray]:
    """KL value (0 log 0 = 0) and gradient H^T M^T (1 - y / (MHx + b))."""
    w = loss._checked_intensity(as_vector(x, loss.n))
    y = loss.y
    value = float(np.sum(xlogy(y, y) - xlogy(y, w) - y + w))
    grad = loss.forward.T @ (1.0 - y / w)
    return value, grad


def kl_hessian_vec(loss: PoissonKLLoss, x: ArrayLike, v: ArrayLike) -> FloatArray:
    w = loss._checked_intensity(as_vector(x, loss.n))
    direction = as_vector(v, loss.n, name="v")
    return loss.forward.T @ ((loss.y / w**2) * (loss.forward @ direction))


__all__ = [
    "KL_DOMAIN_MARGIN",
    "LeastSquaresLoss",
    "PoissonKLLoss",
    "build_forward_model",
    "fwhm_to_sigma",
    "kl_hessian_vec",
    "kl_value_grad",
    "ls_gradient",
    "power_iteration",
]
