"""Run experiment suites: generate, solve against a reference, analyse, record."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import structlog

from schemas.experiment import ExperimentSpec, ResultRecord
from schemas.solver import BacktrackingStep, SolverConfig
from tools.recorder import (
    NDJSONRecorder,
    WALL_TIME_COLUMNS,
    write_json,
    write_table_csv,
    write_trace_csv,
)

from ..config import get_settings
from ..core import FloatArray, kkt_residual_ls, objective
from ..diagnostics import convergence_order, identification_report
from ..errors import InsufficientTailError, PolyNewtError, ReferenceNotConvergedError
from ..json_utils import content_hash
from ..logging_config import run_context
from ..losses import LeastSquaresLoss
from ..metrics import MetricsSnapshot, metrics
from ..solvers import SolverTrace, reference_solution, solve
from .generators import STREAMS, GeneratedInstance, generate
from .imaging import write_intensity_csv, write_triptych

logger = structlog.get_logger(__name__)

SUMMARY_COLUMNS = list(ResultRecord.model_fields)
POLISH_MAX_ITERS = 10_000


@dataclass(frozen=True)
class ReferencePoint:
    x: Optional[FloatArray]
    source: str
    error: Optional[str] = None


@dataclass(frozen=True)
class SuiteResult:
    name: str
    records: list[ResultRecord]
    summary_hash: str
    out_dir: Path
    metrics: MetricsSnapshot

    @property
    def all_converged(self) -> bool:
        return all(rec.converged and rec.error is None for rec in self.records)

    @property
    def failures(self) -> list[ResultRecord]:
        return [rec for rec in self.records if not rec.converged or rec.error is not None]


def compute_reference(instance: GeneratedInstance) -> ReferencePoint:
    """Backtracking FISTA to the reference tolerance, polished by Newton-FISTA if needed."""
    spec, prob = instance.spec, instance.problem
    try:
        x_ref = reference_solution(
            prob, spec.reference_tol, max_iters=spec.reference_max_iters, x0=instance.x0
        )
        return ReferencePoint(x_ref, "fista")
    except ReferenceNotConvergedError as exc:
        logger.warning("reference_not_converged", experiment=spec.id, kkt=exc.residual)
        start = instance.x0 if exc.best_x is None else exc.best_x
    polish = SolverConfig(
        method="newton_fista",
        step=BacktrackingStep(),
        kkt_tol=spec.reference_tol,
        max_iters=POLISH_MAX_ITERS,
        keep_history=False,
    )
    trace = solve(prob, polish, start)
    if trace.converged and trace.x is not None:
        return ReferencePoint(trace.x, "fista+newton")
    message = f"reference not converged (best kkt {trace.best_kkt:.3e})"
    logger.error("reference_failed", experiment=spec.id, kkt=trace.best_kkt)
    return ReferencePoint(None, "failed", message)


def summary_hash(records: Sequence[ResultRecord]) -> str:
    """Content hash of the records with wall-time columns removed."""
    return content_hash(
        [
            {k: v for k, v in rec.model_dump().items() if k not in WALL_TIME_COLUMNS}
            for rec in records
        ]
    )


def _failed_record(spec: ExperimentSpec, label: str, error: str) -> ResultRecord:
    return ResultRecord(
        experiment_id=spec.id,
        method=label,
        seed=spec.seed,
        status="failed",
        converged=False,
        iterations=0,
        terminal_kkt=math.inf,
        terminal_objective=math.inf,
        error=error,
    )


def _write_images(instance: GeneratedInstance, x: FloatArray, run_dir: Path, label: str) -> None:
    n_side = instance.spec.n_side
    counts = instance.extras.get("counts")
    if n_side is None or not isinstance(counts, np.ndarray):
        return
    write_triptych(run_dir / f"{label}.png", instance.x_true, counts, x, n_side)
    write_intensity_csv(run_dir / f"{label}.reconstruction.csv", x, n_side)


def _analyse(
    instance: GeneratedInstance,
    label: str,
    trace: SolverTrace,
    reference: ReferencePoint,
    run_dir: Path,
) -> ResultRecord:
    prob = instance.problem
    x = trace.x if trace.x is not None else instance.x0
    final = trace.final
    x_ref = reference.x
    dist = gap = None
    identified = order = None
    tail = 0
    if x_ref is not None:
        dist = float(np.linalg.norm(x - x_ref))
        ref_value = objective(prob, x_ref)
        if math.isfinite(ref_value):
            gap = (final.objective - ref_value) / max(1.0, abs(ref_value))
        try:
            order, tail = convergence_order(trace, x_ref)
        except InsufficientTailError as exc:
            tail = exc.available
        identified = identification_report(trace, prob, x_ref).identified_at
    kkt_ls = kkt_residual_ls(prob, x) if isinstance(prob.loss, LeastSquaresLoss) else None

    write_trace_csv(trace, run_dir / f"{label}.trace.csv", prob, x_ref)
    if instance.spec.kind == "poisson_sr":
        _write_images(instance, x, run_dir, label)

    return ResultRecord(
        experiment_id=instance.spec.id,
        method=label,
        seed=instance.spec.seed,
        status=trace.status.value if reference.error is None else "reference_failed",
        converged=trace.converged,
        iterations=trace.iterations,
        iterations_to_tol=trace.iterations if trace.converged else None,
        wall_time_ns=trace.elapsed_ns,
        terminal_kkt=final.kkt_residual,
        terminal_kkt_ls=kkt_ls,
        terminal_objective=final.objective,
        dist_to_ref=dist,
        rel_objective_gap=gap,
        newton_steps_accepted=trace.newton_accepted,
        newton_steps_rejected=trace.newton_rejected,
        identification_iter=identified,
        order_estimate=order,
        order_tail_len=tail,
        reference_source=reference.source,
        error=reference.error or (trace.message or None),
    )


def run_single(
    instance: GeneratedInstance,
    label: str,
    config: SolverConfig,
    reference: ReferencePoint,
    run_dir: Path,
) -> ResultRecord:
    metrics.note_run_started(label)
    with run_context(experiment=instance.spec.id, method=label, seed=instance.spec.seed):
        logger.info("run_started")
        try:
            trace = solve(instance.problem, config, instance.x0)
            record = _analyse(instance, label, trace, reference, run_dir)
        except PolyNewtError as exc:
            logger.error("run_failed", error=str(exc), error_type=type(exc).__name__)
            metrics.note_run_failed()
            return _failed_record(instance.spec, label, str(exc))
        logger.info(
            "run_finished",
            status=record.status,
            iterations=record.iterations,
            kkt=record.terminal_kkt,
            dist_to_ref=record.dist_to_ref,
        )
    metrics.note_newton(
        accepted=record.newton_steps_accepted, rejected=record.newton_steps_rejected
    )
    metrics.note_run_finished(converged=record.converged and record.error is None)
    return record


def _write_manifest(
    instance: GeneratedInstance, reference: ReferencePoint, run_dir: Path
) -> None:
    spec = instance.spec
    write_json(
        {
            "spec": spec.model_dump(mode="json"),
            "seed": spec.seed,
            "streams": STREAMS,
            "data_hash": instance.data_hash,
            "lambda": instance.lam,
            "reference_source": reference.source,
            "configs": {label: cfg.model_dump(mode="json") for label, cfg in spec.solvers.items()},
        },
        run_dir / "manifest.json",
    )
    write_json(
        {"x_true": instance.x_true, "x0": instance.x0, "x_ref": reference.x},
        run_dir / "ground_truth.json",
    )


def run_suite(
    specs: Sequence[ExperimentSpec],
    out_dir: Path | str,
    *,
    threads: int | None = None,
    name: str = "suite",
) -> SuiteResult:
    """Generate every experiment, compute its reference, run each solver configuration."""
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    workers = threads if threads is not None else get_settings().threads
    metrics.reset()
    logger.info("suite_started", suite=name, experiments=len(specs), threads=workers)

    records: list[ResultRecord] = []
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for spec in specs:
            run_dir = root / spec.id
            run_dir.mkdir(parents=True, exist_ok=True)
            try:
                instance = generate(spec)
            except (PolyNewtError, ValueError) as exc:
                logger.error("generation_failed", experiment=spec.id, error=str(exc))
                records.extend(_failed_record(spec, label, str(exc)) for label in spec.solvers)
                continue
            reference = compute_reference(instance)
            _write_manifest(instance, reference, run_dir)
            futures = [
                pool.submit(run_single, instance, label, config, reference, run_dir)
                for label, config in spec.solvers.items()
            ]
            records.extend(future.result() for future in futures)

    digest = summary_hash(records)
    snapshot = metrics.snapshot()
    write_table_csv((rec.model_dump() for rec in records), root / "summary.csv", SUMMARY_COLUMNS)
    write_json(
        {
            "suite": name,
            "summary_hash": digest,
            "records": [rec.model_dump() for rec in records],
            "metrics": snapshot.to_dict(),
        },
        root / "summary.json",
    )
    with NDJSONRecorder(root / "results.ndjson") as recorder:
        for rec in records:
            recorder.write(rec.model_dump())
    logger.info(
        "suite_finished",
        suite=name,
        runs=len(records),
        failures=sum(1 for rec in records if not rec.converged or rec.error is not None),
        summary_hash=digest,
    )
    return SuiteResult(name, records, digest, root, snapshot)


__all__ = [
    "ReferencePoint",
    "SUMMARY_COLUMNS",
    "SuiteResult",
    "compute_reference",
    "run_single",
    "run_suite",
    "summary_hash",
]
