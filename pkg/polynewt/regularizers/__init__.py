"""Polyhedral regularizer families."""

from .composite import composite_effective_subspace
from .l1 import L1Reg, l1_effective_subspace, l1_prox
from .linf import LInfReg, linf_effective_subspace, linf_prox, project_l1_ball
from .nonneg_l1 import NonnegL1Reg, nonneg_l1_effective_subspace, nonneg_l1_prox
from .sorted_l1 import (
    SortedL1Reg,
    oscar_weights,
    sorted_l1_effective_subspace,
    sorted_l1_prox,
)
from .tv1d import TV1DReg, difference_matrix, tv1d_effective_subspace, tv1d_prox
from .zero import ZeroReg

__all__ = [
    "L1Reg",
    "LInfReg",
    "NonnegL1Reg",
    "SortedL1Reg",
    "TV1DReg",
    "ZeroReg",
    "composite_effective_subspace",
    "difference_matrix",
    "l1_effective_subspace",
    "l1_prox",
    "linf_effective_subspace",
    "linf_prox",
    "nonneg_l1_effective_subspace",
    "nonneg_l1_prox",
    "oscar_weights",
    "project_l1_ball",
    "sorted_l1_effective_subspace",
    "sorted_l1_prox",
    "tv1d_effective_subspace",
    "tv1d_prox",
]
