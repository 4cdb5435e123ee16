from __future__ import annotations

from typing import Annotated, Dict, List, Literal, Optional

from pydantic import AfterValidator, BaseModel, ConfigDict, Field, model_validator

from .problem import SUPPORTED_SCHEMA_VERSIONS
from .solver import SolverConfig

ExperimentKind = Literal["lasso", "linf", "tv1d", "oscar", "poisson_sr", "remark34"]

SEED_MAX = 2**64 - 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


def _check_version(v: str) -> str:
    if v not in SUPPORTED_SCHEMA_VERSIONS:
        raise ValueError(f"Unsupported schema_version: {v}")
    return v


SchemaVersion = Annotated[str, AfterValidator(_check_version)]


class ExperimentSpec(_Strict):
    """One generated instance plus the solver configurations compared on it."""

    id: str
    kind: ExperimentKind
    m: int = Field(gt=0)
    n: int = Field(gt=0)
    sparsity: int = Field(default=8, ge=0)  # nonzeros, maximal coordinates or point sources
    lambda_rule: str = "lambda = lambda_c * ||A^T b||_inf"
    lambda_c: float = Field(default=0.1, gt=0)
    noise_var: float = Field(default=1e-3, ge=0)
    seed: int = Field(default=0, ge=0, le=SEED_MAX)
    rho: float = Field(default=0.7, ge=0, lt=1)  # oscar column correlation
    n_side: Optional[int] = Field(default=None, gt=0)
    q: int = Field(default=2, gt=0)
    fwhm: float = Field(default=2.5, ge=0)  # low-resolution pixels
    background: float = Field(default=1.0, gt=0)
    intensity: float = Field(default=200.0, gt=0)  # mean point-source intensity
    reference_tol: float = Field(default=1e-12, gt=0)
    reference_max_iters: int = Field(default=1_000_000, ge=1)
    solvers: Dict[str, SolverConfig] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_geometry(self) -> "ExperimentSpec":
        if self.kind == "poisson_sr":
            if self.n_side is None:
                raise ValueError("poisson_sr requires n_side")
            if self.n_side % self.q != 0:
                raise ValueError(f"q={self.q} must divide n_side={self.n_side}")
            if self.n != self.n_side**2 or self.m != (self.n_side // self.q) ** 2:
                raise ValueError("poisson_sr requires n = n_side^2 and m = (n_side / q)^2")
        if self.kind == "remark34" and (self.m, self.n) != (2, 2):
            raise ValueError("remark34 is the fixed 2 x 2 instance")
        if self.kind == "tv1d" and self.n % 3 != 0:
            raise ValueError("tv1d block signal needs n divisible by 3")
        if self.kind in {"lasso", "linf"} and self.sparsity > self.n:
            raise ValueError("sparsity cannot exceed n")
        return self


class SuiteSpec(_Strict):
    schema_version: SchemaVersion = "1.0"
    name: str
    description: str = ""
    experiments: List[ExperimentSpec] = Field(default_factory=list)


class ResultRecord(_Strict):
    experiment_id: str
    method: str
    seed: int
    status: str
    converged: bool
    iterations: int
    iterations_to_tol: Optional[int] = None
    wall_time_ns: int = 0
    terminal_kkt: float
    terminal_kkt_ls: Optional[float] = None
    terminal_objective: float
    dist_to_ref: Optional[float] = None
    rel_objective_gap: Optional[float] = None
    newton_steps_accepted: int = 0
    newton_steps_rejected: int = 0
    identification_iter: Optional[int] = None
    order_estimate: Optional[float] = None
    order_tail_len: int = 0
    reference_source: str = "fista"
    error: Optional[str] = None


class RunConfig(_Strict):
    """Document accepted by ``--config``; command-line flags override its fields."""

    schema_version: SchemaVersion = "1.0"
    problem: Optional[str] = None
    x0: Optional[List[float]] = None
    solver: SolverConfig = Field(default_factory=SolverConfig)
    suite: Optional[str] = None
    seed: Optional[int] = Field(default=None, ge=0, le=SEED_MAX)
    out: Optional[str] = None


__all__ = [
    "ExperimentKind",
    "ExperimentSpec",
    "ResultRecord",
    "RunConfig",
    "SuiteSpec",
]
