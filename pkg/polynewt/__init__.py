"""Proximal gradient methods accelerated by Newton steps on effective subspaces.

The suite runner lives in :mod:`polynewt.bench` and the command line in
:mod:`polynewt.cli`; both are imported on demand.
"""

from .core import (
    ProblemInstance,
    RegularizerOracle,
    SmoothLossOracle,
    SubspaceBasis,
    fenchel_young_check,
    kkt_residual,
    kkt_residual_ls,
    objective,
)
from .diagnostics import check_tilt_stability, convergence_order, identification_report
from .errors import PolyNewtError
from .losses import LeastSquaresLoss, PoissonKLLoss, build_forward_model
from .solvers import SolverTrace, reference_solution, solve
from .subspace_newton import newton_direction

__version__ = "0.1.0"

__all__ = [
    "LeastSquaresLoss",
    "PoissonKLLoss",
    "PolyNewtError",
    "ProblemInstance",
    "RegularizerOracle",
    "SmoothLossOracle",
    "SolverTrace",
    "SubspaceBasis",
    "build_forward_model",
    "check_tilt_stability",
    "convergence_order",
    "fenchel_young_check",
    "identification_report",
    "kkt_residual",
    "kkt_residual_ls",
    "newton_direction",
    "objective",
    "reference_solution",
    "solve",
    "__version__",
]
