"""Tilt stability, empirical convergence order and subspace identification."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
import structlog
from numpy.typing import ArrayLike

from .core import FloatArray, ProblemInstance, SubspaceBasis, as_vector, kkt_residual
from .errors import DualInfeasibleError, InsufficientTailError, NonStationaryError
from .solvers import SolverTrace, StepKind

logger = structlog.get_logger(__name__)

KERNEL_TOL = 1e-10
COSINE_MARGIN = 1e-8
STATIONARITY_WARN = 1e-6
PROJECTION_LIMIT = 1e-6
TAIL_FLOOR = 1e-13
TAIL_CEILING = 1e-2
MIN_TAIL_POINTS = 3
IDENTIFICATION_TOL = 1e-8
SUPPORT_TOL = 1e-8


@dataclass(frozen=True)
class TiltReport:
    ker_dim: int
    subspace_dim: int
    max_principal_cosine: float
    tilt_stable: bool
    tolerance: float = COSINE_MARGIN
    kernel_tol: float = KERNEL_TOL
    kkt_residual: float = 0.0
    dual_violation: float = 0.0
    projected: bool = False
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, object]:
        payload = asdict(self)
        payload["warnings"] = list(self.warnings)
        return payload


def hessian_kernel(hessian: ArrayLike, *, tol: float = KERNEL_TOL) -> SubspaceBasis:
    """Eigenvectors whose eigenvalue is below tol * lambda_max."""
    matrix = np.asarray(hessian, dtype=np.float64)
    n = matrix.shape[0]
    eigenvalues, eigenvectors = scipy.linalg.eigh(0.5 * (matrix + matrix.T))
    largest = float(eigenvalues[-1]) if n else 0.0
    if largest <= 0.0:
        return SubspaceBasis.full(n)
    return SubspaceBasis(eigenvectors[:, eigenvalues < tol * largest])


def tilt_verdict(
    kernel: SubspaceBasis, subspace: SubspaceBasis, *, margin: float = COSINE_MARGIN
) -> tuple[float, bool]:
    if kernel.r == 0 or subspace.r == 0:
        return 0.0, True
    singular = scipy.linalg.svdvals(kernel.basis.T @ subspace.basis)
    cosine = min(max(float(singular[0]), 0.0), 1.0)
    return cosine, cosine <= 1.0 - margin


def check_tilt_stability(prob: ProblemInstance, x_candidate: ArrayLike) -> TiltReport:
    x = as_vector(x_candidate, prob.n, name="x_candidate")
    notes: list[str] = []
    kkt = kkt_residual(prob, x, 1.0)
    if kkt > STATIONARITY_WARN:
        logger.warning("tilt_candidate_not_stationary", kkt=kkt)
        notes.append(f"candidate is not stationary: kkt residual {kkt:.3e}")

    kernel = hessian_kernel(prob.loss.hessian(x))
    z_bar = -prob.loss.gradient(x)
    violation = prob.reg.dual_violation(z_bar)
    projected = False
    if violation > PROJECTION_LIMIT:
        raise NonStationaryError(
            f"-grad f(x) lies outside dom g* by {violation:.3e}; not a stationary point"
        )
    if violation > prob.reg.dual_tolerance():
        z_bar = prob.reg.project_dual(z_bar)
        projected = True
        notes.append(f"dual point projected onto dom g* (violation {violation:.3e})")
    try:
        subspace = prob.reg.effective_subspace(z_bar)
    except DualInfeasibleError as exc:
        raise NonStationaryError(str(exc)) from exc

    cosine, stable = tilt_verdict(kernel, subspace)
    report = TiltReport(
        ker_dim=kernel.r,
        subspace_dim=subspace.r,
        max_principal_cosine=cosine,
        tilt_stable=stable,
        kkt_residual=kkt,
        dual_violation=violation,
        projected=projected,
        warnings=tuple(notes),
    )
    logger.info(
        "tilt_checked",
        ker_dim=report.ker_dim,
        subspace_dim=report.subspace_dim,
        cosine=cosine,
        stable=stable,
    )
    return report


def newton_pairs(trace: SolverTrace, x_ref: ArrayLike) -> list[tuple[int, float, float]]:
    """(k, error before, error after) for every accepted Newton step with a recorded start."""
    ref = np.asarray(x_ref, dtype=np.float64)
    pairs = []
    for before, after in zip(trace.records, trace.records[1:]):
        if after.step_kind is not StepKind.NEWTON or before.x is None or after.x is None:
            continue
        pairs.append(
            (
                after.k,
                float(np.linalg.norm(before.x - ref)),
                float(np.linalg.norm(after.x - ref)),
            )
        )
    return pairs


def convergence_order(
    trace: SolverTrace,
    x_ref: ArrayLike,
    *,
    floor: float = TAIL_FLOOR,
    ceiling: float = TAIL_CEILING,
) -> tuple[float, int]:
    """Slope of log e_{k+1} against log e_k over the accepted Newton steps.

    Each accepted step contributes the error of the iterate it started from and of its
    result; the tail length counts the distinct iterates used.
    """
    inside = [
        (k, before, after)
        for k, before, after in newton_pairs(trace, x_ref)
        if floor < before <= ceiling and floor < after <= ceiling
    ]
    points = {k for k, _, _ in inside} | {k - 1 for k, _, _ in inside}
    if len(points) < MIN_TAIL_POINTS:
        raise InsufficientTailError(
            f"{len(points)} Newton tail points in ({floor:g}, {ceiling:g}], "
            f"need {MIN_TAIL_POINTS}",
            available=len(points),
        )
    logs = np.log(np.asarray([(before, after) for _, before, after in inside]))
    slope = np.polyfit(logs[:, 0], logs[:, 1], 1)[0]
    return float(slope), len(points)


@dataclass(frozen=True)
class IdentificationReport:
    identified_at: Optional[int]
    terminal_reduced_dim: Optional[int]
    dim_history: list[tuple[int, int]] = field(default_factory=list)
    support_in_subspace: Optional[bool] = None
    reference_subspace_dim: Optional[int] = None

    def to_dict(self) -> dict[str, object]:
        return {
            "identified_at": self.identified_at,
            "terminal_reduced_dim": self.terminal_reduced_dim,
            "dim_history": [list(item) for item in self.dim_history],
            "support_in_subspace": self.support_in_subspace,
            "reference_subspace_dim": self.reference_subspace_dim,
        }


def _reference_subspace(prob: ProblemInstance, x_ref: FloatArray) -> Optional[SubspaceBasis]:
    try:
        z_ref = -prob.loss.gradient(x_ref)
        if prob.reg.dual_violation(z_ref) > PROJECTION_LIMIT:
            return None
        return prob.reg.effective_subspace(prob.reg.project_dual(z_ref))
    except (DualInfeasibleError, ValueError):
        return None


def identification_report(
    trace: SolverTrace, prob: ProblemInstance, x_ref: ArrayLike
) -> IdentificationReport:
    ref = as_vector(x_ref, prob.n, name="x_ref")
    observed = [(rec.k, rec.subspace) for rec in trace.records if rec.subspace is not None]
    reference = _reference_subspace(prob, ref)
    reference_dim = None if reference is None else reference.r
    if not observed:
        return IdentificationReport(None, None, [], None, reference_dim)

    history = [(k, basis.r) for k, basis in observed]
    terminal = observed[-1][1]
    identified_at = observed[-1][0]
    for k, basis in reversed(observed):
        if basis.distance(terminal) > IDENTIFICATION_TOL:
            break
        identified_at = k

    support = np.flatnonzero(np.abs(ref) > SUPPORT_TOL * max(1.0, float(np.max(np.abs(ref)))))
    contained = all(terminal.contains(np.eye(prob.n)[:, i]) for i in support)
    return IdentificationReport(identified_at, terminal.r, history, contained, reference_dim)


__all__ = [
    "IdentificationReport",
    "TiltReport",
    "check_tilt_stability",
    "convergence_order",
    "hessian_kernel",
    "identification_report",
    "newton_pairs",
    "tilt_verdict",
]
