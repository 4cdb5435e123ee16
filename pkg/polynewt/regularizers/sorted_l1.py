"""Sorted l1 norm (SLOPE) and its OSCAR instantiation."""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike
from sklearn.isotonic import isotonic_regression

from ..core import ACT_TOL, FloatArray, RegularizerOracle, SubspaceBasis
from ..errors import ConfigError
from ._common import check_positive, require_dual_feasible, vector


def validate_weights(weights: ArrayLike) -> FloatArray:
    lam = np.asarray(weights, dtype=np.float64)
    if lam.ndim != 1 or lam.size == 0:
        raise ConfigError("sorted l1 weights must be a non-empty vector")
    if not np.all(np.isfinite(lam)) or np.any(lam < 0.0):
        raise ConfigError("sorted l1 weights must be finite and nonnegative")
    if np.any(np.diff(lam) > 0.0):
        raise ConfigError("sorted l1 weights must be nonincreasing")
    if lam[0] <= 0.0:
        raise ConfigError("the leading sorted l1 weight must be positive")
    return lam


def oscar_weights(w1: float, w2: float, n: int) -> FloatArray:
    """lambda_i = w1 + w2 * (n - i) for i = 1..n."""
    if w1 < 0.0 or w2 < 0.0:
        raise ConfigError("OSCAR parameters must be nonnegative")
    return float(w1) + float(w2) * np.arange(n - 1, -1, -1, dtype=np.float64)


def _decreasing_order(magnitude: FloatArray) -> np.ndarray:
    # ties broken by index order
    return np.argsort(-magnitude, kind="stable")


def sorted_l1_value(x: ArrayLike, weights: ArrayLike) -> float:
    vec = vector(x, "x")
    return float(np.dot(np.sort(np.abs(vec))[::-1], np.asarray(weights, dtype=np.float64)))


def sorted_l1_prox(v: ArrayLike, t: float, weights: ArrayLike) -> FloatArray:
    """Prox of t * sum(lambda_i |y|_(i)) via pool-adjacent-violators on the sorted magnitudes."""
    t = check_positive("t", t)
    vec = vector(v, "v")
    lam = np.asarray(weights, dtype=np.float64)
    if lam.size != vec.size:
        raise ValueError(f"expected {vec.size} weights, got {lam.size}")
    magnitude = np.abs(vec)
    order = _decreasing_order(magnitude)
    fitted = isotonic_regression(magnitude[order] - t * lam, y_min=0.0, increasing=False)
    result = np.empty_like(vec)
    result[order] = fitted
    return np.sign(vec) * result


def sorted_l1_dual_violation(z: ArrayLike, weights: ArrayLike) -> float:
    vec = vector(z)
    lam = np.asarray(weights, dtype=np.float64)
    partial = np.cumsum(np.sort(np.abs(vec))[::-1])
    if partial.size == 0:
        return 0.0
    return max(float(np.max(partial - np.cumsum(lam))), 0.0)


def _sorted_l1_subspace(z: FloatArray, lam: FloatArray) -> SubspaceBasis:
    n = z.size
    magnitude = np.abs(z)
    order = _decreasing_order(magnitude)
    sorted_mag = magnitude[order]
    partial = np.cumsum(sorted_mag)
    budget = np.cumsum(lam)
    active = np.flatnonzero(partial >= budget * (1.0 - ACT_TOL))
    if active.size == 0:
        return SubspaceBasis.zero(n)

    band = ACT_TOL * lam[0]
    signs = np.sign(z)
    generators: list[FloatArray] = []
    for pos in active:
        k = int(pos) + 1
        level = sorted_mag[pos]
        top = np.flatnonzero(magnitude > level + band)
        equal = np.flatnonzero(np.abs(magnitude - level) <= band)
        v_k = np.zeros(n)
        v_k[top] = signs[top]
        if level <= band:
            # zero level: one subgradient plus every coordinate of the tie block
            generators.append(v_k)
            for j in equal:
                generators.append(np.eye(n)[:, j])
            continue
        share = (k - top.size) / equal.size
        v_k[equal] = share * signs[equal]
        generators.append(v_k)
        if top.size + equal.size == k:
            # position k closes its tie block, so the subdifferential is the single point v_k
            continue
        anchor = int(equal.max())
        for j in equal:
            if j == anchor:
                continue
            diff = np.zeros(n)
            diff[j] = 1.0
            diff[anchor] = -signs[j] / signs[anchor]
            generators.append(diff)
    return SubspaceBasis.from_spanning_set(np.column_stack(generators), n)


def sorted_l1_effective_subspace(z: ArrayLike, weights: ArrayLike) -> SubspaceBasis:
    """Spanning set built from one subgradient and tie differences per active partial sum."""
    vec = vector(z)
    lam = validate_weights(weights)
    if lam.size != vec.size:
        raise ValueError(f"expected {vec.size} weights, got {lam.size}")
    require_dual_feasible("sorted_l1", sorted_l1_dual_violation(vec, lam), float(lam[0]))
    return _sorted_l1_subspace(vec, lam)


class SortedL1Reg(RegularizerOracle):
    kind = "slope"

    def __init__(
        self,
        weights: ArrayLike,
        scale: float = 1.0,
        *,
        oscar_params: tuple[float, float] | None = None,
    ) -> None:
        lam = validate_weights(weights)
        super().__init__(scale, lam.size)
        lam = lam.copy()
        lam.setflags(write=False)
        self._weights = lam
        self.oscar_params = oscar_params
        if oscar_params is not None:
            self.kind = "oscar"

    @classmethod
    def oscar(cls, w1: float, w2: float, n: int, scale: float = 1.0) -> "SortedL1Reg":
        return cls(oscar_weights(w1, w2, n), scale, oscar_params=(float(w1), float(w2)))

    @property
    def weights(self) -> FloatArray:
        return self._weights

    def dual_tolerance(self) -> float:
        return 1e-9 * (1.0 + self.scale * float(self._weights[0]))

    def _base_value(self, x: FloatArray) -> float:
        return sorted_l1_value(x, self._weights)

    def _base_prox(self, v: FloatArray, t: float) -> FloatArray:
        return sorted_l1_prox(v, t, self._weights)

    def _base_dual_violation(self, z: FloatArray) -> float:
        return sorted_l1_dual_violation(z, self._weights)

    def _base_effective_subspace(self, z: FloatArray) -> SubspaceBasis:
        return _sorted_l1_subspace(z, self._weights)

    def describe(self) -> dict[str, object]:
        if self.oscar_params is not None:
            w1, w2 = self.oscar_params
            return {"kind": "oscar", "lambda": self.scale, "w1": w1, "w2": w2}
        return {"kind": "slope", "lambda": self.scale, "weights": self._weights.tolist()}
