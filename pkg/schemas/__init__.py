"""Interchange documents: problems, solver configurations and experiment suites."""

from .experiment import ExperimentSpec, ResultRecord, RunConfig, SuiteSpec
from .problem import SUPPORTED_SCHEMA_VERSIONS, ProblemSpec, RegSpec, parse_problem
from .solver import SolverConfig

__all__ = [
    "ExperimentSpec",
    "ProblemSpec",
    "RegSpec",
    "ResultRecord",
    "RunConfig",
    "SUPPORTED_SCHEMA_VERSIONS",
    "SolverConfig",
    "SuiteSpec",
    "parse_problem",
]
