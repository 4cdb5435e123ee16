"""Synthetic benchmark instances and the suite runner."""

from .generators import (
    GENERATORS,
    GeneratedInstance,
    gen_lasso,
    gen_linf,
    gen_oscar,
    gen_poisson_sr,
    gen_remark34,
    gen_tv,
    generate,
)
from .suite import SuiteResult, compute_reference, run_suite, summary_hash

__all__ = [
    "GENERATORS",
    "GeneratedInstance",
    "SuiteResult",
    "compute_reference",
    "gen_lasso",
    "gen_linf",
    "gen_oscar",
    "gen_poisson_sr",
    "gen_remark34",
    "gen_tv",
    "generate",
    "run_suite",
    "summary_hash",
]
