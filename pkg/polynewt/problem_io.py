"""Problem documents: JSON with optional raw float64 side files."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np
import structlog
from pydantic import ValidationError

from schemas.problem import (
    LeastSquaresSpec,
    PoissonKLSpec,
    ProblemSpec,
    RegSpec,
    parse_problem,
)

from .core import ProblemInstance, RegularizerOracle
from .errors import ConfigError
from .json_utils import dumps
from .losses import LeastSquaresLoss, PoissonKLLoss
from .regularizers import L1Reg, LInfReg, NonnegL1Reg, SortedL1Reg, TV1DReg, ZeroReg

logger = structlog.get_logger(__name__)

BINARY_DTYPE = "<f8"


def build_regularizer(spec: RegSpec, n: int) -> RegularizerOracle:
    lam = spec.lambda_
    if spec.kind == "l1":
        return L1Reg(lam, n)
    if spec.kind == "linf":
        return LInfReg(lam, n)
    if spec.kind == "nonneg_l1":
        return NonnegL1Reg(lam, n)
    if spec.kind == "zero":
        return ZeroReg(n)
    if spec.kind == "tv1d":
        return TV1DReg(lam, n)
    if spec.kind == "oscar":
        assert spec.w1 is not None and spec.w2 is not None
        return SortedL1Reg.oscar(spec.w1, spec.w2, n, scale=lam)
    assert spec.weights is not None
    if len(spec.weights) != n:
        raise ConfigError(f"slope needs {n} weights, got {len(spec.weights)}")
    return SortedL1Reg(spec.weights, lam)


def _read_binary(path: Path, count: int) -> np.ndarray:
    if not path.is_file():
        raise ConfigError(f"missing data file {path}")
    data = np.fromfile(path, dtype=BINARY_DTYPE)
    if data.size != count:
        raise ConfigError(f"{path} holds {data.size} values, expected {count}")
    return data.astype(np.float64)


def _least_squares(spec: LeastSquaresSpec, base_dir: Path) -> LeastSquaresLoss:
    if spec.A is not None:
        A = np.asarray(spec.A, dtype=np.float64)
    else:
        assert spec.A_file is not None and spec.shape is not None
        m, n = spec.shape
        A = _read_binary(base_dir / spec.A_file, m * n).reshape(m, n)
    if spec.b is not None:
        b = np.asarray(spec.b, dtype=np.float64)
    else:
        assert spec.b_file is not None
        b = _read_binary(base_dir / spec.b_file, A.shape[0])
    return LeastSquaresLoss(A, b)


def _poisson(spec: PoissonKLSpec) -> PoissonKLLoss:
    return PoissonKLLoss.from_geometry(spec.n_side, spec.q, spec.fwhm, spec.y, spec.background)


def build_problem(spec: ProblemSpec, base_dir: Path | str = ".") -> ProblemInstance:
    base = Path(base_dir)
    try:
        if isinstance(spec.loss, LeastSquaresSpec):
            loss: LeastSquaresLoss | PoissonKLLoss = _least_squares(spec.loss, base)
        else:
            loss = _poisson(spec.loss)
        reg = build_regularizer(spec.reg, spec.n)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"problem {spec.name!r}: {exc}") from exc
    return ProblemInstance(spec.n, loss, reg, name=spec.name)


def read_json(path: Path | str) -> Any:
    """Parse a JSON file, reporting syntax errors with their line and column."""
    target = Path(path)
    if not target.is_file():
        raise ConfigError(f"no such file: {target}")
    text = target.read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{target}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def load_problem(path: Path | str) -> ProblemInstance:
    target = Path(path)
    payload = read_json(target)
    try:
        spec = parse_problem(payload)
    except ValidationError as exc:
        raise ConfigError(f"{target}: {exc}") from exc
    problem = build_problem(spec, target.parent)
    logger.info("problem_loaded", path=str(target), name=problem.name, n=problem.n)
    return problem


def problem_spec(
    problem: ProblemInstance, *, files: tuple[str, str] | None = None
) -> ProblemSpec:
    """Document describing ``problem``; ``files`` names the A and b side files."""
    loss = problem.loss
    reg = RegSpec.model_validate(problem.reg.describe())
    if isinstance(loss, LeastSquaresLoss):
        if files is None:
            loss_spec: LeastSquaresSpec | PoissonKLSpec = LeastSquaresSpec(
                A=loss.A.tolist(), b=loss.b.tolist()
            )
        else:
            loss_spec = LeastSquaresSpec(
                A_file=files[0], b_file=files[1], shape=[loss.m, loss.n]
            )
    elif isinstance(loss, PoissonKLLoss):
        if loss.geometry is None:
            raise ConfigError("only Poisson losses built from a geometry can be serialized")
        n_side, q, fwhm = loss.geometry
        background = loss.background
        level: float | list[float] = (
            float(background[0]) if np.all(background == background[0]) else background.tolist()
        )
        loss_spec = PoissonKLSpec(
            n_side=n_side, q=q, fwhm=fwhm, background=level, y=loss.y.tolist()
        )
    else:
        raise ConfigError(f"cannot serialize loss of type {type(loss).__name__}")
    return ProblemSpec(name=problem.name, n=problem.n, loss=loss_spec, reg=reg)


def dump_problem(problem: ProblemInstance, path: Path | str, *, binary: bool = False) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    files = None
    if binary and isinstance(problem.loss, LeastSquaresLoss):
        files = (f"{target.stem}_A.bin", f"{target.stem}_b.bin")
        np.ascontiguousarray(problem.loss.A, dtype=BINARY_DTYPE).tofile(target.parent / files[0])
        np.ascontiguousarray(problem.loss.b, dtype=BINARY_DTYPE).tofile(target.parent / files[1])
    spec = problem_spec(problem, files=files)
    target.write_text(dumps(spec, indent=2) + "\n", encoding="utf-8")
    logger.info("problem_written", path=str(target), binary=files is not None)
    return target


__all__ = [
    "build_problem",
    "build_regularizer",
    "dump_problem",
    "load_problem",
    "problem_spec",
    "read_json",
]
