from __future__ import annotations

import numpy as np

from ..core import FloatArray, RegularizerOracle, SubspaceBasis


class ZeroReg(RegularizerOracle):
    """g = 0. Its conjugate is the indicator of {0}, so the effective subspace is everything."""

    kind = "zero"

    def __init__(self, n: int | None = None) -> None:
        super().__init__(1.0, n)

    def _base_value(self, x: FloatArray) -> float:
        return 0.0

    def _base_prox(self, v: FloatArray, t: float) -> FloatArray:
        return v.copy()

    def _base_dual_violation(self, z: FloatArray) -> float:
        return float(np.max(np.abs(z))) if z.size else 0.0

    def _base_effective_subspace(self, z: FloatArray) -> SubspaceBasis:
        return SubspaceBasis.full(z.size)

    def describe(self) -> dict[str, object]:
        return {"kind": self.kind}
