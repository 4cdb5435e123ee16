"""Problem definition, oracle contracts and the convex-analysis identities.

Every solver in the package consumes a :class:`ProblemInstance`, which pairs a
smooth loss oracle with a polyhedral regularizer oracle. Regularizers are
written for their unscaled base function; the scale law (value times lambda,
prox at lambda * alpha, effective subspace at z / lambda) is applied once here.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import ClassVar, Iterable, Sequence

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray
from scipy.sparse.linalg import LinearOperator

from .errors import ConfigError, DualInfeasibleError

INF = math.inf

BUILD_TOL = 1e-10
ACT_TOL = 1e-8
DUAL_TOL = 1e-9
FENCHEL_YOUNG_TOL = 1e-8

FloatArray = NDArray[np.float64]


def as_vector(x: ArrayLike, n: int | None = None, *, name: str = "x") -> FloatArray:
    vec = np.asarray(x, dtype=np.float64)
    if vec.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {vec.shape}")
    if n is not None and vec.shape[0] != n:
        raise ValueError(f"{name} must have length {n}, got {vec.shape[0]}")
    return vec


def is_infinite(value: float) -> bool:
    return math.isinf(value) and value > 0


@dataclass(frozen=True, eq=False)
class SubspaceBasis:
    """Orthonormal basis (n x r) of a linear subspace."""

    basis: FloatArray
    build_tol: float = BUILD_TOL

    def __post_init__(self) -> None:
        basis = np.asarray(self.basis, dtype=np.float64)
        if basis.ndim != 2:
            raise ValueError("basis must be a two-dimensional array")
        basis = basis.copy()
        basis.setflags(write=False)
        object.__setattr__(self, "basis", basis)

    @property
    def n(self) -> int:
        return int(self.basis.shape[0])

    @property
    def r(self) -> int:
        return int(self.basis.shape[1])

    @classmethod
    def zero(cls, n: int) -> "SubspaceBasis":
        return cls(np.zeros((n, 0)))

    @classmethod
    def full(cls, n: int) -> "SubspaceBasis":
        return cls(np.eye(n))

    @classmethod
    def coordinate(cls, n: int, indices: Iterable[int]) -> "SubspaceBasis":
        idx = sorted(set(int(i) for i in indices))
        return cls(np.eye(n)[:, idx])

    @classmethod
    def from_spanning_set(
        cls, vectors: ArrayLike, n: int, *, tol: float = BUILD_TOL
    ) -> "SubspaceBasis":
        """Orthonormalize the columns of ``vectors`` by column-pivoted QR."""
        spanning = np.asarray(vectors, dtype=np.float64)
        if spanning.size == 0:
            return cls.zero(n)
        spanning = spanning.reshape(n, -1)
        q, r, _ = scipy.linalg.qr(spanning, mode="economic", pivoting=True)
        diag = np.abs(np.diag(r))
        if diag.size == 0 or diag[0] == 0.0:
            return cls(np.zeros((n, 0)), build_tol=tol)
        rank = int(np.count_nonzero(diag > tol * diag[0]))
        return cls(q[:, :rank], build_tol=tol)

    def projector(self) -> FloatArray:
        return self.basis @ self.basis.T

    def project(self, v: ArrayLike) -> FloatArray:
        vec = as_vector(v, self.n, name="v")
        return self.basis @ (self.basis.T @ vec)

    def contains(self, v: ArrayLike, tol: float = 1e-8) -> bool:
        vec = as_vector(v, self.n, name="v")
        return float(np.linalg.norm(vec - self.project(vec))) <= tol * max(
            1.0, float(np.linalg.norm(vec))
        )

    def distance(self, other: "SubspaceBasis") -> float:
        """Frobenius distance between the two orthogonal projectors."""
        if other.n != self.n:
            raise ValueError("subspaces live in different dimensions")
        cross = self.basis.T @ other.basis
        # ||P - P'||_F^2 = ||(I - P)B'||_F^2 + ||(I - P')B||_F^2, summed from residuals
        outside = other.basis - self.basis @ cross
        inside = self.basis - other.basis @ cross.T
        return math.hypot(float(np.linalg.norm(outside)), float(np.linalg.norm(inside)))

    def equals(self, other: "SubspaceBasis", tol: float = 1e-8) -> bool:
        return self.r == other.r and self.distance(other) <= tol


class SmoothLossOracle(ABC):
    """Twice continuously differentiable convex loss f."""

    n: int

    @abstractmethod
    def value(self, x: FloatArray) -> float: ...

    @abstractmethod
    def gradient(self, x: FloatArray) -> FloatArray: ...

    @abstractmethod
    def hessian(self, x: FloatArray) -> FloatArray: ...

    @abstractmethod
    def hess_vec(self, x: FloatArray, v: FloatArray) -> FloatArray: ...

    def domain_check(self, x: FloatArray) -> bool:
        return bool(np.all(np.isfinite(x)))

    @property
    def lipschitz_grad_hint(self) -> float | None:
        return None

    def hessian_operator(self, x: FloatArray) -> LinearOperator:
        point = np.array(x, dtype=np.float64)

        def _apply(v: FloatArray) -> FloatArray:
            return self.hess_vec(point, np.ravel(v))

        return LinearOperator((self.n, self.n), matvec=_apply, rmatvec=_apply, dtype=np.float64)


class RegularizerOracle(ABC):
    """Polyhedral regularizer lambda * g0 where g0 is a support function.

    Subclasses implement the unscaled base hooks; the public methods apply the
    scale law. For every family the conjugate is the indicator of a polyhedron,
    so ``conjugate`` returns 0 or +inf.
    """

    kind: ClassVar[str] = "abstract"

    def __init__(self, scale: float = 1.0, n: int | None = None) -> None:
        scale = float(scale)
        if not math.isfinite(scale) or scale <= 0.0:
            raise ConfigError(f"regularizer scale must be positive, got {scale}")
        if n is not None and n < 1:
            raise ConfigError(f"regularizer dimension must be positive, got {n}")
        self._scale = scale
        self._n = n

    @property
    def scale(self) -> float:
        return self._scale

    @property
    def n(self) -> int | None:
        return self._n

    # base hooks, unscaled
    @abstractmethod
    def _base_value(self, x: FloatArray) -> float: ...

    @abstractmethod
    def _base_prox(self, v: FloatArray, t: float) -> FloatArray: ...

    @abstractmethod
    def _base_dual_violation(self, z: FloatArray) -> float: ...

    @abstractmethod
    def _base_effective_subspace(self, z: FloatArray) -> SubspaceBasis: ...

    def _vector(self, x: ArrayLike, name: str) -> FloatArray:
        return as_vector(x, self._n, name=name)

    def value(self, x: ArrayLike) -> float:
        base = self._base_value(self._vector(x, "x"))
        if is_infinite(base):
            return INF
        return self._scale * base

    def prox(self, v: ArrayLike, alpha: float) -> FloatArray:
        if not alpha > 0.0:
            raise ValueError(f"prox step must be positive, got {alpha}")
        return self._base_prox(self._vector(v, "v"), self._scale * float(alpha))

    def dual_violation(self, z: ArrayLike) -> float:
        vec = self._vector(z, "z")
        return self._scale * self._base_dual_violation(vec / self._scale)

    def dual_tolerance(self) -> float:
        return DUAL_TOL * (1.0 + self._scale)

    def dual_domain_check(self, z: ArrayLike) -> bool:
        return self.dual_violation(z) <= self.dual_tolerance()

    def conjugate(self, u: ArrayLike) -> float:
        return 0.0 if self.dual_domain_check(u) else INF

    def effective_subspace(self, z: ArrayLike) -> SubspaceBasis:
        vec = self._vector(z, "z")
        violation = self.dual_violation(vec)
        if violation > self.dual_tolerance():
            raise DualInfeasibleError(
                f"{self.kind}: dual point outside dom g* (violation {violation:.3e})",
                violation=violation,
            )
        return self._base_effective_subspace(vec / self._scale)

    def project_dual(self, z: ArrayLike) -> FloatArray:
        """Euclidean projection of z onto dom g* (Moreau decomposition)."""
        vec = self._vector(z, "z")
        return vec - self.prox(vec, 1.0)

    def describe(self) -> dict[str, object]:
        return {"kind": self.kind, "lambda": self._scale}


@dataclass(frozen=True)
class ProblemInstance:
    n: int
    loss: SmoothLossOracle
    reg: RegularizerOracle
    name: str = field(default="problem")

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ConfigError(f"dimension must be positive, got {self.n}")
        if self.loss.n != self.n:
            raise ConfigError(f"loss acts on length {self.loss.n}, problem has n={self.n}")
        if self.reg.n is not None and self.reg.n != self.n:
            raise ConfigError(f"regularizer acts on length {self.reg.n}, problem has n={self.n}")


def _require_finite(name: str, values: Sequence[float] | FloatArray) -> None:
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{name} contains non-finite entries")


def fenchel_young_check(reg: RegularizerOracle, y: ArrayLike, u: ArrayLike) -> bool:
    """True iff g(y) + g*(u) = <u, y> within tolerance, i.e. u in the subdifferential at y."""
    y_vec = np.asarray(y, dtype=np.float64)
    u_vec = np.asarray(u, dtype=np.float64)
    _require_finite("y", y_vec)
    _require_finite("u", u_vec)
    g_y = reg.value(y_vec)
    if is_infinite(g_y):
        raise ValueError("y must lie in dom g")
    if not reg.dual_domain_check(u_vec):
        return False
    inner = float(np.dot(u_vec, y_vec))
    return abs(g_y - inner) <= FENCHEL_YOUNG_TOL * (1.0 + abs(inner))


def objective(prob: ProblemInstance, x: ArrayLike) -> float:
    vec = as_vector(x, prob.n)
    if not prob.loss.domain_check(vec):
        return INF
    reg_value = prob.reg.value(vec)
    if is_infinite(reg_value):
        return INF
    return prob.loss.value(vec) + reg_value


def kkt_residual(prob: ProblemInstance, x: ArrayLike, alpha: float) -> float:
    """Relative fixed-point gap of the prox-gradient map at x."""
    vec = as_vector(x, prob.n)
    grad = prob.loss.gradient(vec)
    y = prob.reg.prox(vec - alpha * grad, alpha)
    return float(np.linalg.norm(vec - y)) / (
        1.0 + float(np.linalg.norm(vec)) + float(np.linalg.norm(grad))
    )


def kkt_residual_ls(prob: ProblemInstance, x: ArrayLike) -> float:
    """Least-squares relative residual with a unit step and ||Ax - b|| in the denominator."""
    residual_fn = getattr(prob.loss, "residual", None)
    if residual_fn is None:
        raise ConfigError("kkt_residual_ls requires a least-squares loss")
    vec = as_vector(x, prob.n)
    residual = residual_fn(vec)
    grad = prob.loss.gradient(vec)
    y = prob.reg.prox(vec - grad, 1.0)
    return float(np.linalg.norm(vec - y)) / (
        1.0 + float(np.linalg.norm(vec)) + float(np.linalg.norm(residual))
    )


__all__ = [
    "ACT_TOL",
    "BUILD_TOL",
    "DUAL_TOL",
    "FENCHEL_YOUNG_TOL",
    "FloatArray",
    "INF",
    "ProblemInstance",
    "RegularizerOracle",
    "SmoothLossOracle",
    "SubspaceBasis",
    "as_vector",
    "fenchel_young_check",
    "is_infinite",
    "kkt_residual",
    "kkt_residual_ls",
    "objective",
]
