"""Command-line entry point: solve, bench, check-tilt, inspect and gen."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import numpy as np
import structlog
from pydantic import ValidationError

from schemas.experiment import RunConfig
from schemas.solver import SolverConfig
from tools.recorder import read_trace_csv, summarize_trace_rows, write_json, write_trace_csv
from tools.suites import load_suites

from .config import get_settings
from .core import as_vector
from .diagnostics import check_tilt_stability
from .errors import ConfigError, DomainError, NonStationaryError
from .json_utils import dumps
from .logging_config import configure_logging, run_context
from .metrics import metrics
from .problem_io import dump_problem, load_problem, read_json
from .solvers import TerminalStatus, solve

logger = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MAX_ITERS = 3
EXIT_DOMAIN_FAILURE = 4
EXIT_BENCH_FAILURE = 5
EXIT_NOT_TILT_STABLE = 6

METHOD_CHOICES = ("ista", "fista", "newton-ista", "newton-fista")
_SOLVER_DEFAULTS = SolverConfig()


def parse_step(text: str) -> Dict[str, Any]:
    """``fixed``, ``fixed:ALPHA``, ``bt`` or ``bt:ALPHA0,SHRINK``."""
    kind, _, params = text.partition(":")
    values = [float(item) for item in params.split(",") if item.strip()] if params else []
    if kind == "fixed" and len(values) <= 1:
        return {"kind": "fixed", "alpha": values[0] if values else None}
    if kind in {"bt", "backtracking"} and len(values) <= 2:
        step: Dict[str, Any] = {"kind": "backtracking"}
        if values:
            step["alpha0"] = values[0]
        if len(values) == 2:
            step["shrink"] = values[1]
        return step
    raise argparse.ArgumentTypeError(
        f"invalid step {text!r}; use fixed[:alpha] or bt[:alpha0,rho]"
    )


def parse_extrapolation(text: str) -> Dict[str, Any]:
    """``fista``, ``cd:D`` or ``llt:P,Q``."""
    kind, _, params = text.partition(":")
    values = [float(item) for item in params.split(",") if item.strip()] if params else []
    if kind == "fista" and not values:
        return {"kind": "original_fista"}
    if kind == "cd" and len(values) <= 1:
        return {"kind": "chambolle_dossal", **({"d": values[0]} if values else {})}
    if kind == "llt" and len(values) in (0, 2):
        return {"kind": "liang_luo_tao", **(dict(zip(("p", "q"), values)) if values else {})}
    raise argparse.ArgumentTypeError(
        f"invalid extrapolation {text!r}; use fista, cd[:d] or llt[:p,q]"
    )


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_override(document: Dict[str, Any], assignment: str) -> None:
    """Set ``dotted.path=value`` inside ``document``; values are read as JSON when possible."""
    path, sep, raw = assignment.partition("=")
    if not sep or not path:
        raise ConfigError(f"override {assignment!r} must look like key.path=value")
    keys = path.split(".")
    node = document
    for key in keys[:-1]:
        child = node.get(key)
        if child is None:
            child = node[key] = {}
        if not isinstance(child, dict):
            raise ConfigError(f"override {assignment!r}: {key!r} is not a section")
        node = child
    node[keys[-1]] = _parse_value(raw)


def _format_validation(exc: ValidationError, source: str) -> str:
    lines = [f"{source}: invalid configuration"]
    for err in exc.errors():
        location = ".".join(str(part) for part in err["loc"]) or "<root>"
        lines.append(f"  {location}: {err['msg']}")
    return "\n".join(lines)


def build_run_config(args: argparse.Namespace) -> RunConfig:
    document: Dict[str, Any] = {}
    source = "command line"
    if args.config:
        payload = read_json(args.config)
        if not isinstance(payload, dict):
            raise ConfigError(f"{args.config}: expected a JSON object")
        document = payload
        source = str(args.config)
    for assignment in args.overrides or ():
        apply_override(document, assignment)

    solver = document.setdefault("solver", {})
    flags = {
        "method": getattr(args, "method", None),
        "kkt_tol": getattr(args, "kkt_tol", None),
        "switch_tol": getattr(args, "switch_tol", None),
        "max_iters": getattr(args, "max_iters", None),
        "step": getattr(args, "step", None),
        "extrapolation": getattr(args, "extrapolation", None),
    }
    for key, value in flags.items():
        if value is not None:
            solver[key] = value.replace("-", "_") if key == "method" else value
    if getattr(args, "no_safeguard", False):
        solver["safeguard"] = False
    for key in ("problem", "suite", "seed", "out"):
        value = getattr(args, key, None)
        if value is not None:
            document[key] = str(value) if isinstance(value, Path) else value
    try:
        return RunConfig.model_validate(document)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc, source)) from exc


def _load_point(path: Path, n: int) -> np.ndarray:
    payload = read_json(path)
    if isinstance(payload, dict):
        payload = payload.get("x")
    try:
        return as_vector(payload, n, name="point")
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def cmd_solve(args: argparse.Namespace) -> int:
    run = build_run_config(args)
    if run.problem is None:
        raise ConfigError("solve needs --problem")
    prob = load_problem(run.problem)
    x0 = np.zeros(prob.n) if run.x0 is None else as_vector(run.x0, prob.n, name="x0")
    try:
        with run_context(problem=prob.name, method=run.solver.label):
            trace = solve(prob, run.solver, x0)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN_FAILURE

    out = Path(run.out) if run.out else get_settings().out_dir / "solve"
    write_trace_csv(trace, out / "trace.csv", prob)
    final = trace.final
    summary = {
        "problem": prob.name,
        "method": run.solver.label,
        "status": trace.status.value,
        "iterations": trace.iterations,
        "terminal_kkt": final.kkt_residual,
        "objective": final.objective,
        "newton_accepted": trace.newton_accepted,
        "newton_rejected": trace.newton_rejected,
        "x": trace.x,
        "config": run.model_dump(mode="json"),
    }
    write_json(summary, out / "summary.json")
    print(dumps(summary, indent=2))
    if trace.status is TerminalStatus.CONVERGED:
        return EXIT_OK
    if trace.status is TerminalStatus.MAX_ITERS:
        return EXIT_MAX_ITERS
    return EXIT_DOMAIN_FAILURE


def cmd_bench(args: argparse.Namespace) -> int:
    from .bench import run_suite

    run = build_run_config(args)
    if run.suite is None:
        raise ConfigError("bench needs --suite")
    registry = load_suites(args.suites)
    specs = registry.experiments(run.suite, seed=run.seed)
    out = Path(run.out) if run.out else get_settings().out_dir / run.suite
    result = run_suite(specs, out, threads=args.threads, name=run.suite)
    report = {
        "suite": result.name,
        "summary_hash": result.summary_hash,
        "runs": len(result.records),
        "failures": [f"{rec.experiment_id}/{rec.method}: {rec.status}" for rec in result.failures],
        "metrics": metrics.snapshot().to_dict(),
        "out_dir": str(result.out_dir),
    }
    print(dumps(report, indent=2))
    return EXIT_OK if result.all_converged else EXIT_BENCH_FAILURE


def cmd_check_tilt(args: argparse.Namespace) -> int:
    prob = load_problem(args.problem)
    point = _load_point(args.point, prob.n)
    try:
        report = check_tilt_stability(prob, point)
    except NonStationaryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for note in report.warnings:
        print(f"warning: {note}", file=sys.stderr)
    print(dumps(report.to_dict(), indent=2))
    return EXIT_OK if report.tilt_stable else EXIT_NOT_TILT_STABLE


def cmd_inspect(args: argparse.Namespace) -> int:
    try:
        rows = read_trace_csv(args.trace)
    except FileNotFoundError as exc:
        raise ConfigError(f"no such trace file: {args.trace}") from exc
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    print(dumps(summarize_trace_rows(rows), indent=2))
    return EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    from .bench import generate

    run = build_run_config(args)
    if run.suite is None:
        raise ConfigError("gen needs --suite")
    registry = load_suites(args.suites)
    specs = registry.experiments(run.suite, seed=run.seed)
    if args.experiment:
        specs = [spec for spec in specs if spec.id == args.experiment]
        if not specs:
            raise ConfigError(f"suite {run.suite!r} has no experiment {args.experiment!r}")
    out = Path(run.out) if run.out else get_settings().out_dir / "instances"
    written = []
    for spec in specs:
        instance = generate(spec)
        path = dump_problem(instance.problem, out / f"{spec.id}.json", binary=args.binary)
        write_json(
            {
                "experiment": spec.id,
                "seed": spec.seed,
                "lambda": instance.lam,
                "data_hash": instance.data_hash,
                "x_true": instance.x_true,
                "x0": instance.x0,
            },
            out / f"{spec.id}.truth.json",
        )
        written.append(str(path))
    print(dumps({"written": written}, indent=2))
    return EXIT_OK


def _add_solver_flags(parser: argparse.ArgumentParser) -> None:
    d = _SOLVER_DEFAULTS
    parser.add_argument(
        "--method",
        choices=METHOD_CHOICES,
        help=f"Iteration scheme (default: {d.method.replace('_', '-')}).",
    )
    parser.add_argument(
        "--kkt-tol", type=float, help=f"Relative KKT stopping tolerance (default: {d.kkt_tol:g})."
    )
    parser.add_argument(
        "--switch-tol",
        type=float,
        help=f"Prox gap below which a Newton step is tried (default: {d.switch_tol:g}).",
    )
    parser.add_argument(
        "--max-iters", type=int, help=f"Iteration budget (default: {d.max_iters})."
    )
    parser.add_argument(
        "--step",
        type=parse_step,
        help="Step mode fixed[:alpha] or bt[:alpha0,rho] (default: fixed with alpha = 1/L).",
    )
    parser.add_argument(
        "--extrapolation",
        type=parse_extrapolation,
        help="Momentum rule fista, cd[:d] or llt[:p,q] (default: fista).",
    )
    parser.add_argument(
        "--no-safeguard",
        action="store_true",
        help="Accept every Newton candidate in dom f (default: safeguard on).",
    )


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    parser = argparse.ArgumentParser(
        prog="polynewt",
        description="Proximal gradient solvers with effective-subspace Newton steps.",
    )
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="Raise log verbosity (repeatable)."
    )
    parser.add_argument(
        "--config", type=Path, help="JSON run configuration (schema_version 1.0)."
    )
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        metavar="KEY=VALUE",
        help="Override a configuration field by dotted path, e.g. solver.kkt_tol=1e-6.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve_p = sub.add_parser("solve", help="Solve one problem file.")
    solve_p.add_argument("--problem", type=Path, help="Problem JSON document.")
    solve_p.add_argument(
        "--out", type=Path, help=f"Output directory (default: {settings.out_dir}/solve)."
    )
    _add_solver_flags(solve_p)
    solve_p.set_defaults(handler=cmd_solve)

    bench_p = sub.add_parser("bench", help="Run a benchmark suite.")
    bench_p.add_argument("--suite", help="Suite name from the suite file.")
    bench_p.add_argument("--seed", type=int, help="Replace every experiment seed.")
    bench_p.add_argument(
        "--out", type=Path, help=f"Output directory (default: {settings.out_dir}/SUITE)."
    )
    bench_p.add_argument(
        "--suites",
        type=Path,
        default=settings.suites_path,
        help=f"Suite definitions (default: {settings.suites_path}).",
    )
    bench_p.add_argument(
        "--threads",
        type=int,
        default=None,
        help=f"Concurrent runs (default: POLYNEWT_THREADS = {settings.threads}).",
    )
    bench_p.set_defaults(handler=cmd_bench)

    tilt_p = sub.add_parser("check-tilt", help="Test tilt stability at a candidate point.")
    tilt_p.add_argument("--problem", type=Path, required=True, help="Problem JSON document.")
    tilt_p.add_argument(
        "--point", type=Path, required=True, help='Candidate as a JSON list or {"x": [...]}.'
    )
    tilt_p.set_defaults(handler=cmd_check_tilt)

    inspect_p = sub.add_parser("inspect", help="Summarise a trace CSV.")
    inspect_p.add_argument("trace", type=Path, help="Trace CSV written by solve or bench.")
    inspect_p.set_defaults(handler=cmd_inspect)

    gen_p = sub.add_parser("gen", help="Write suite instances as problem documents.")
    gen_p.add_argument("--suite", help="Suite name from the suite file.")
    gen_p.add_argument("--experiment", help="Only this experiment id (default: all).")
    gen_p.add_argument("--seed", type=int, help="Replace every experiment seed.")
    gen_p.add_argument(
        "--out", type=Path, help=f"Output directory (default: {settings.out_dir}/instances)."
    )
    gen_p.add_argument(
        "--binary", action="store_true", help="Store A and b as raw float64 side files."
    )
    gen_p.add_argument(
        "--suites",
        type=Path,
        default=settings.suites_path,
        help=f"Suite definitions (default: {settings.suites_path}).",
    )
    gen_p.set_defaults(handler=cmd_gen)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    settings = get_settings()
    level = "DEBUG" if args.verbose >= 1 else settings.log_level
    configure_logging(log_level=level, json_logs=settings.json_logs)
    logger.debug("command_started", command=args.command)
    try:
        return int(args.handler(args))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"error: {_format_validation(exc, args.command)}", file=sys.stderr)
        return EXIT_USAGE


__all__ = [
    "EXIT_BENCH_FAILURE",
    "EXIT_DOMAIN_FAILURE",
    "EXIT_MAX_ITERS",
    "EXIT_NOT_TILT_STABLE",
    "EXIT_OK",
    "EXIT_USAGE",
    "apply_override",
    "build_parser",
    "build_run_config",
    "main",
    "parse_extrapolation",
    "parse_step",
]
