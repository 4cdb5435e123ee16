"""Trace CSV, results NDJSON and run manifest writers."""

from __future__ import annotations

import csv
import math
from collections import Counter
from pathlib import Path
from typing import Any, Iterable, Optional, TextIO

import numpy as np
import structlog

from polynewt.core import ProblemInstance, kkt_residual_ls, objective
from polynewt.json_utils import dumps
from polynewt.losses import LeastSquaresLoss
from polynewt.solvers import SolverTrace

log = structlog.get_logger("polynewt.recorder")

TRACE_COLUMNS = (
    "k",
    "objective",
    "kkt_residual",
    "kkt_residual_ls",
    "step_kind",
    "dist_to_ref",
    "rel_objective_gap",
    "alpha",
    "prox_gap",
    "reduced_dim",
    "fallback",
    "wall_ns",
)
WALL_TIME_COLUMNS = frozenset({"wall_ns", "wall_time_ns"})


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return repr(value)
    return str(value)


def trace_rows(
    trace: SolverTrace,
    prob: Optional[ProblemInstance] = None,
    x_ref: Optional[np.ndarray] = None,
) -> list[dict[str, str]]:
    """One row per record; reference columns stay blank without ``x_ref``."""
    ref_objective = None
    if prob is not None and x_ref is not None:
        ref_objective = objective(prob, x_ref)
    least_squares = prob is not None and isinstance(prob.loss, LeastSquaresLoss)
    rows = []
    for rec in trace.records:
        dist = gap = kkt_ls = None
        if rec.x is not None:
            if x_ref is not None:
                dist = float(np.linalg.norm(rec.x - x_ref))
            if ref_objective is not None and math.isfinite(ref_objective):
                gap = (rec.objective - ref_objective) / max(1.0, abs(ref_objective))
            if least_squares:
                assert prob is not None
                kkt_ls = kkt_residual_ls(prob, rec.x)
        report = rec.newton_report
        rows.append(
            {
                "k": _cell(rec.k),
                "objective": _cell(rec.objective),
                "kkt_residual": _cell(rec.kkt_residual),
                "kkt_residual_ls": _cell(kkt_ls),
                "step_kind": rec.step_kind.value,
                "dist_to_ref": _cell(dist),
                "rel_objective_gap": _cell(gap),
                "alpha": _cell(rec.alpha),
                "prox_gap": _cell(rec.prox_gap),
                "reduced_dim": _cell(None if report is None else report.reduced_dim),
                "fallback": "" if report is None else report.fallback_used.value,
                "wall_ns": _cell(rec.wall_ns),
            }
        )
    return rows


def write_trace_csv(
    trace: SolverTrace,
    path: Path | str,
    prob: Optional[ProblemInstance] = None,
    x_ref: Optional[np.ndarray] = None,
) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TRACE_COLUMNS)
        writer.writeheader()
        writer.writerows(trace_rows(trace, prob, x_ref))
    return target


def read_trace_csv(path: Path | str) -> list[dict[str, str]]:
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"k", "kkt_residual", "step_kind"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: not a trace file, missing columns {sorted(missing)}")
        return list(reader)


def summarize_trace_rows(rows: list[dict[str, str]]) -> dict[str, Any]:
    if not rows:
        return {"iterations": 0, "terminal_kkt": None, "step_kinds": {}}
    kinds = Counter(row["step_kind"] for row in rows)
    last = rows[-1]
    return {
        "iterations": int(last["k"]),
        "terminal_kkt": float(last["kkt_residual"]),
        "terminal_objective": float(last["objective"]) if last.get("objective") else None,
        "step_kinds": dict(sorted(kinds.items())),
    }


def write_table_csv(rows: Iterable[dict[str, Any]], path: Path | str, columns: list[str]) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _cell(row.get(key)) for key in columns})
    return target


def write_json(obj: Any, path: Path | str) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(dumps(obj, indent=2) + "\n", encoding="utf-8")
    return target


class NDJSONRecorder:
    """Appends one JSON document per line."""

    def __init__(self, path: Path | str) -> None:
        self.path = Path(path)
        self._fh: Optional[TextIO] = None
        self.total_written = 0

    def __enter__(self) -> "NDJSONRecorder":
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = self.path.open("w", encoding="utf-8")
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()

    def write(self, obj: Any) -> None:
        if self._fh is None:
            raise RuntimeError("recorder is not open")
        self._fh.write(dumps(obj))
        self._fh.write("\n")
        self.total_written += 1

    def close(self) -> None:
        if self._fh is not None:
            self._fh.flush()
            self._fh.close()
            self._fh = None
            log.debug("recorder closed", path=str(self.path), written=self.total_written)


__all__ = [
    "NDJSONRecorder",
    "TRACE_COLUMNS",
    "WALL_TIME_COLUMNS",
    "read_trace_csv",
    "summarize_trace_rows",
    "trace_rows",
    "write_json",
    "write_table_csv",
    "write_trace_csv",
]
