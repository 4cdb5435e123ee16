"""Proximal gradient engines with an optional subspace Newton acceleration.

``solve`` runs ISTA or FISTA. The Newton variants add a switch: once the prox
gap ||u_k - y_k|| falls below ``switch_tol`` the solver restricts a Newton step
to the effective subspace of the dual certificate z_k and, with the safeguard
on, keeps it only if it does not increase the KKT residual.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
import structlog
from numpy.typing import ArrayLike

from schemas.solver import (
    BacktrackingStep,
    ChambolleDossal,
    Extrapolation,
    FixedStep,
    LiangLuoTao,
    SolverConfig,
)

from .config import get_settings
from .core import (
    FloatArray,
    ProblemInstance,
    SubspaceBasis,
    as_vector,
    fenchel_young_check,
    kkt_residual,
    objective,
)
from .errors import (
    ConfigError,
    DomainError,
    DualInfeasibleError,
    ReferenceNotConvergedError,
    StepSizeError,
)
from .subspace_newton import Fallback, NewtonStepReport, newton_direction

logger = structlog.get_logger(__name__)

MAX_HALVINGS = 60
DESCENT_SLACK = 1e-12
REFERENCE_TOL = 1e-12
REFERENCE_MAX_ITERS = 1_000_000


class StepKind(str, Enum):
    INITIAL = "initial"
    PROX_ONLY = "prox_only"
    NEWTON = "newton"
    NEWTON_REJECTED = "newton_rejected"


class TerminalStatus(str, Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    DOMAIN_FAILURE = "domain_failure"


@dataclass(frozen=True, eq=False)
class IterationRecord:
    k: int
    x: Optional[FloatArray]
    objective: float
    kkt_residual: float
    step_kind: StepKind
    prox_gap: float
    alpha: float
    newton_report: Optional[NewtonStepReport] = None
    subspace: Optional[SubspaceBasis] = None
    wall_ns: int = 0

    @property
    def reduced_dim(self) -> Optional[int]:
        return None if self.newton_report is None else self.newton_report.reduced_dim


@dataclass(eq=False)
class SolverTrace:
    config: SolverConfig
    records: list[IterationRecord] = field(default_factory=list)
    status: TerminalStatus = TerminalStatus.MAX_ITERS
    x: Optional[FloatArray] = None
    best_x: Optional[FloatArray] = None
    best_kkt: float = math.inf
    message: str = ""

    @property
    def iterations(self) -> int:
        return self.records[-1].k if self.records else 0

    @property
    def converged(self) -> bool:
        return self.status is TerminalStatus.CONVERGED

    @property
    def final(self) -> IterationRecord:
        if not self.records:
            raise ValueError("empty trace")
        return self.records[-1]

    @property
    def elapsed_ns(self) -> int:
        return self.records[-1].wall_ns if self.records else 0

    @property
    def newton_accepted(self) -> int:
        return sum(1 for rec in self.records if rec.step_kind is StepKind.NEWTON)

    @property
    def newton_rejected(self) -> int:
        return sum(1 for rec in self.records if rec.step_kind is StepKind.NEWTON_REJECTED)

    def _observe(self, record: IterationRecord, x: FloatArray) -> None:
        self.records.append(record)
        self.x = x
        if record.kkt_residual < self.best_kkt:
            self.best_kkt = record.kkt_residual
            self.best_x = x


@dataclass
class MomentumState:
    t: float = 1.0
    since_restart: int = 0

    def advance(self) -> int:
        self.since_restart += 1
        return self.since_restart

    def reset(self) -> None:
        self.t = 1.0
        self.since_restart = 0


def extrapolation_beta(rule: Extrapolation, k: int, state: MomentumState) -> float:
    """Momentum coefficient beta_k; updates ``state.t`` for the t-sequence rules."""
    if k < 1:
        raise ValueError(f"iteration index must be >= 1, got {k}")
    if isinstance(rule, ChambolleDossal):
        return (k - 1.0) / (k + rule.d)
    p, q = (rule.p, rule.q) if isinstance(rule, LiangLuoTao) else (1.0, 1.0)
    t_prev = state.t
    state.t = 0.5 * (p + math.sqrt(q + 4.0 * t_prev * t_prev))
    return (t_prev - 1.0) / state.t


def ista_step(
    prob: ProblemInstance,
    x: ArrayLike,
    alpha: float,
    *,
    certify: bool | None = None,
) -> tuple[FloatArray, FloatArray]:
    """One forward-backward step: y = prox(x - alpha grad f(x)), z = (x - y)/alpha - grad f(x)."""
    if not alpha > 0.0:
        raise ValueError(f"step size must be positive, got {alpha}")
    vec = as_vector(x, prob.n)
    if not prob.loss.domain_check(vec):
        raise DomainError("ista_step called outside dom f")
    grad = prob.loss.gradient(vec)
    y = prob.reg.prox(vec - alpha * grad, alpha)
    z = (vec - y) / alpha - grad
    if certify is None:
        certify = get_settings().debug_certify
    if certify and not fenchel_young_check(prob.reg, y, z):
        logger.warning("resolvent_certification_failed", alpha=alpha, kind=prob.reg.kind)
    return y, z


def backtracking_alpha(
    prob: ProblemInstance,
    base_point: ArrayLike,
    alpha0: float,
    rho: float,
    *,
    max_halvings: int = MAX_HALVINGS,
) -> float:
    """Largest alpha0 * rho**j keeping the prox point in dom f under the quadratic upper bound."""
    if not alpha0 > 0.0:
        raise ValueError(f"alpha0 must be positive, got {alpha0}")
    if not 0.0 < rho < 1.0:
        raise ValueError(f"shrink factor must lie in (0, 1), got {rho}")
    x = as_vector(base_point, prob.n)
    if not prob.loss.domain_check(x):
        raise DomainError("backtracking base point outside dom f")
    fx = prob.loss.value(x)
    grad = prob.loss.gradient(x)
    slack = DESCENT_SLACK * (1.0 + abs(fx))
    alpha = float(alpha0)
    for _ in range(max_halvings + 1):
        y = prob.reg.prox(x - alpha * grad, alpha)
        if prob.loss.domain_check(y):
            diff = y - x
            bound = fx + float(np.dot(grad, diff)) + float(np.dot(diff, diff)) / (2.0 * alpha)
            if prob.loss.value(y) <= bound + slack:
                return alpha
        alpha *= rho
    raise StepSizeError(f"no sufficient decrease after {max_halvings} reductions from {alpha0:g}")


def _initial_alpha(prob: ProblemInstance, config: SolverConfig) -> float:
    hint = prob.loss.lipschitz_grad_hint
    step = config.step
    if isinstance(step, FixedStep):
        if step.alpha is not None:
            return step.alpha
        if hint is None:
            raise ConfigError("fixed step needs alpha when the loss has no Lipschitz hint")
        return 1.0 / hint
    if step.alpha0 is not None:
        return step.alpha0
    return 1.0 / hint if hint is not None else 1.0


def _newton_attempt(
    prob: ProblemInstance,
    config: SolverConfig,
    y: FloatArray,
    z: FloatArray,
    alpha: float,
    k: int,
) -> tuple[FloatArray, StepKind, Optional[NewtonStepReport], Optional[SubspaceBasis]]:
    try:
        subspace = prob.reg.effective_subspace(z)
    except DualInfeasibleError as exc:
        logger.debug("newton_subspace_unavailable", k=k, violation=exc.violation)
        return y, StepKind.NEWTON_REJECTED, None, None
    rhs = z + prob.loss.gradient(y)
    report = newton_direction(prob.loss.hessian_operator(y), rhs, subspace)
    if report.fallback_used is Fallback.SKIPPED:
        logger.debug("newton_step_skipped", k=k, reduced_dim=report.reduced_dim)
        return y, StepKind.NEWTON_REJECTED, report, subspace
    candidate = y - report.direction
    accepted = prob.loss.domain_check(candidate) and math.isfinite(objective(prob, candidate))
    if accepted and config.safeguard:
        accepted = kkt_residual(prob, candidate, alpha) < kkt_residual(prob, y, alpha)
    if not accepted:
        logger.debug("newton_step_rejected", k=k, reduced_dim=report.reduced_dim)
        return y, StepKind.NEWTON_REJECTED, report, subspace
    logger.debug(
        "newton_step_accepted",
        k=k,
        reduced_dim=report.reduced_dim,
        fallback=report.fallback_used.value,
    )
    return candidate, StepKind.NEWTON, report, subspace


def solve(prob: ProblemInstance, config: SolverConfig, x0: ArrayLike) -> SolverTrace:
    x = as_vector(x0, prob.n, name="x0").copy()
    if not prob.loss.domain_check(x):
        raise DomainError("x0 must lie in the open domain of f")

    trace = SolverTrace(config=config)
    keep = config.keep_history
    started = time.perf_counter_ns()
    alpha = _initial_alpha(prob, config)
    step = config.step
    backtracking = isinstance(step, BacktrackingStep)
    state = MomentumState()
    x_prev = x

    kkt = kkt_residual(prob, x, alpha)
    trace._observe(
        IterationRecord(
            k=0,
            x=x if keep else None,
            objective=objective(prob, x),
            kkt_residual=kkt,
            step_kind=StepKind.INITIAL,
            prox_gap=math.nan,
            alpha=alpha,
        ),
        x,
    )
    if kkt <= config.kkt_tol:
        trace.status = TerminalStatus.CONVERGED

    k = 0
    try:
        while trace.status is not TerminalStatus.CONVERGED and k < config.max_iters:
            k += 1
            u = x
            if config.uses_momentum:
                beta = extrapolation_beta(config.extrapolation, state.advance(), state)
                u = x + beta * (x - x_prev)
                if not prob.loss.domain_check(u):
                    logger.debug("momentum_reset", k=k)
                    state.reset()
                    u = x
            if backtracking:
                assert isinstance(step, BacktrackingStep)
                alpha = backtracking_alpha(prob, u, alpha * step.growth, step.shrink)

            y, z = ista_step(prob, u, alpha)
            gap = float(np.linalg.norm(x - y))
            x_next, kind = y, StepKind.PROX_ONLY
            report: Optional[NewtonStepReport] = None
            subspace: Optional[SubspaceBasis] = None
            if config.uses_newton and gap <= config.switch_tol:
                x_next, kind, report, subspace = _newton_attempt(prob, config, y, z, alpha, k)

            x_prev, x = x, x_next
            if kind is StepKind.NEWTON and config.uses_momentum:
                # restart momentum at the Newton point
                state.reset()
                x_prev = x
            kkt = kkt_residual(prob, x, alpha)
            if kkt <= config.kkt_tol:
                trace.status = TerminalStatus.CONVERGED
            trace._observe(
                IterationRecord(
                    k=k,
                    x=x if keep else None,
                    objective=objective(prob, x),
                    kkt_residual=kkt,
                    step_kind=kind,
                    prox_gap=gap,
                    alpha=alpha,
                    newton_report=report,
                    subspace=subspace if keep else None,
                    wall_ns=time.perf_counter_ns() - started,
                ),
                x,
            )
    except (DomainError, StepSizeError) as exc:
        trace.status = TerminalStatus.DOMAIN_FAILURE
        trace.message = str(exc)
        logger.warning("solver_domain_failure", k=k, method=config.label, error=str(exc))

    if not keep and trace.records and trace.records[-1].x is None:
        last = trace.records[-1]
        trace.records[-1] = IterationRecord(
            k=last.k,
            x=trace.x,
            objective=last.objective,
            kkt_residual=last.kkt_residual,
            step_kind=last.step_kind,
            prox_gap=last.prox_gap,
            alpha=last.alpha,
            newton_report=last.newton_report,
            subspace=last.subspace,
            wall_ns=last.wall_ns,
        )
    logger.info(
        "solver_finished",
        method=config.label,
        status=trace.status.value,
        iterations=trace.iterations,
        kkt=trace.final.kkt_residual,
        newton_accepted=trace.newton_accepted,
    )
    return trace


def reference_solution(
    prob: ProblemInstance,
    tol: float = REFERENCE_TOL,
    *,
    max_iters: int = REFERENCE_MAX_ITERS,
    x0: ArrayLike | None = None,
) -> FloatArray:
    """High-accuracy minimizer from backtracking FISTA."""
    config = SolverConfig(
        method="fista",
        step=BacktrackingStep(),
        kkt_tol=tol,
        max_iters=max_iters,
        keep_history=False,
    )
    start = np.zeros(prob.n) if x0 is None else as_vector(x0, prob.n, name="x0")
    trace = solve(prob, config, start)
    if not trace.converged:
        raise ReferenceNotConvergedError(
            f"reference solver stopped with status {trace.status.value} "
            f"at kkt {trace.best_kkt:.3e} (target {tol:g})",
            best_x=trace.best_x,
            residual=trace.best_kkt,
        )
    assert trace.x is not None
    return trace.x


__all__ = [
    "IterationRecord",
    "MomentumState",
    "SolverTrace",
    "StepKind",
    "TerminalStatus",
    "backtracking_alpha",
    "extrapolation_beta",
    "ista_step",
    "reference_solution",
    "solve",
]
