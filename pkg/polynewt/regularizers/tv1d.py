from __future__ import annotations

import numpy as np
import scipy.sparse as sparse
from numpy.typing import ArrayLike

from ..core import ACT_TOL, FloatArray, RegularizerOracle, SubspaceBasis
from ..errors import ConfigError
from ._common import check_positive, require_dual_feasible, vector


def difference_matrix(n: int) -> sparse.csr_matrix:
    """(n-1) x n forward difference matrix with rows e_i - e_{i+1}."""
    if n < 2:
        raise ConfigError("1D total variation needs n >= 2")
    return sparse.diags([np.ones(n - 1), -np.ones(n - 1)], [0, 1], shape=(n - 1, n), format="csr")


def _tv_denoise(y: FloatArray, lmbd: float) -> FloatArray:
    """Exact minimizer of lmbd * ||Dx||_1 + 0.5 * ||x - y||^2 by a forward/backward pass.

    The forward pass keeps the derivative of the cost-to-come as a piecewise linear
    function, stored as knots plus slope/intercept increments; each step clips it to
    [-lmbd, lmbd] and records where it crosses those levels. The backward pass clips
    every coefficient between its two crossings.
    """
    size = y.size
    if lmbd == 0.0:
        return y.copy()
    knots = np.empty(2 * size)
    slopes = np.empty(2 * size)
    offsets = np.empty(2 * size)
    lower = np.empty(size - 1)
    upper = np.empty(size - 1)

    lower[0] = y[0] - lmbd
    upper[0] = y[0] + lmbd
    left, right = size - 1, size
    knots[left], knots[right] = lower[0], upper[0]
    slopes[left], offsets[left] = 1.0, lmbd - y[0]
    slopes[right], offsets[right] = -1.0, lmbd + y[0]
    first_slope, first_offset = 1.0, -lmbd - y[1]
    last_slope, last_offset = -1.0, y[1] - lmbd

    for k in range(1, size - 1):
        lo_slope, lo_offset = first_slope, first_offset
        lo = left
        while lo <= right and lo_slope * knots[lo] + lo_offset <= -lmbd:
            lo_slope += slopes[lo]
            lo_offset += offsets[lo]
            lo += 1
        lower[k] = (-lmbd - lo_offset) / lo_slope
        left = lo - 1
        knots[left] = lower[k]

        hi_slope, hi_offset = last_slope, last_offset
        hi = right
        while hi >= left and -hi_slope * knots[hi] - hi_offset >= lmbd:
            hi_slope += slopes[hi]
            hi_offset += offsets[hi]
            hi -= 1
        upper[k] = (lmbd + hi_offset) / -hi_slope
        right = hi + 1
        knots[right] = upper[k]

        slopes[left], offsets[left] = lo_slope, lo_offset + lmbd
        slopes[right], offsets[right] = hi_slope, hi_offset + lmbd
        first_slope, first_offset = 1.0, -lmbd - y[k + 1]
        last_slope, last_offset = -1.0, y[k + 1] - lmbd

    lo_slope, lo_offset = first_slope, first_offset
    lo = left
    while lo <= right and lo_slope * knots[lo] + lo_offset <= 0.0:
        lo_slope += slopes[lo]
        lo_offset += offsets[lo]
        lo += 1

    x = np.empty_like(y)
    x[-1] = -lo_offset / lo_slope
    for k in range(size - 2, -1, -1):
        x[k] = min(max(x[k + 1], lower[k]), upper[k])
    return x


def tv1d_value(x: ArrayLike) -> float:
    return float(np.sum(np.abs(np.diff(vector(x, "x")))))


def tv1d_prox(v: ArrayLike, t: float, lam: float = 1.0) -> FloatArray:
    vec = vector(v, "v")
    if vec.size < 2:
        raise ConfigError("1D total variation needs n >= 2")
    return _tv_denoise(vec, check_positive("t", t) * check_positive("lambda", lam))


def tv1d_dual_violation(z: ArrayLike, lam: float = 1.0) -> float:
    """Largest excess over dom g* = {z : sum z = 0, |prefix sums| <= lambda}."""
    vec = vector(z)
    prefix = np.cumsum(vec)
    excess = float(np.max(np.abs(prefix[:-1]))) - lam if vec.size > 1 else -lam
    return max(excess, abs(float(prefix[-1])), 0.0)


def _group_basis(prefix: FloatArray, n: int) -> SubspaceBasis:
    # x_i = x_{i+1} whenever |s_i| < 1 after scaling
    linked = np.abs(prefix[: n - 1]) < 1.0 - ACT_TOL
    starts = np.concatenate(([0], np.flatnonzero(~linked) + 1))
    ends = np.concatenate((starts[1:], [n]))
    basis = np.zeros((n, starts.size))
    for col, (start, end) in enumerate(zip(starts, ends)):
        basis[start:end, col] = 1.0 / np.sqrt(end - start)
    return SubspaceBasis(basis)


def tv1d_effective_subspace(z: ArrayLike, lam: float = 1.0) -> SubspaceBasis:
    """Block-indicator basis of the groups joined by strictly interior prefix sums."""
    lam = check_positive("lambda", lam)
    vec = vector(z)
    if vec.size < 2:
        raise ConfigError("1D total variation needs n >= 2")
    require_dual_feasible("tv1d", tv1d_dual_violation(vec, lam), lam)
    return _group_basis(np.cumsum(vec) / lam, vec.size)


class TV1DReg(RegularizerOracle):
    kind = "tv1d"

    def __init__(self, lam: float, n: int) -> None:
        if n < 2:
            raise ConfigError("1D total variation needs n >= 2")
        super().__init__(lam, n)

    def difference_matrix(self) -> sparse.csr_matrix:
        return difference_matrix(int(self.n or 0))

    def _base_value(self, x: FloatArray) -> float:
        return tv1d_value(x)

    def _base_prox(self, v: FloatArray, t: float) -> FloatArray:
        return _tv_denoise(v, t)

    def _base_dual_violation(self, z: FloatArray) -> float:
        return tv1d_dual_violation(z)

    def _base_effective_subspace(self, z: FloatArray) -> SubspaceBasis:
        return _group_basis(np.cumsum(z), z.size)
