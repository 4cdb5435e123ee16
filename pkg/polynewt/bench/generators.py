"""Seeded synthetic instances for the benchmark suites.

Every random draw comes from its own Philox stream keyed by (seed, experiment
kind, purpose), so changing one experiment never shifts another's data.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg
import structlog

from schemas.experiment import ExperimentSpec

from ..core import FloatArray, ProblemInstance, RegularizerOracle
from ..errors import ConfigError
from ..json_utils import array_hash
from ..losses import LeastSquaresLoss, PoissonKLLoss
from ..regularizers import L1Reg, LInfReg, NonnegL1Reg, SortedL1Reg, TV1DReg

logger = structlog.get_logger(__name__)

STREAMS = {"matrix": 1, "signal": 2, "noise": 3, "counts": 4}
TV_LEVELS = (0.5, -0.3, 0.8)
OSCAR_BLOCKS = (
    (0.15, 0.0),
    (0.05, 3.0),
    (0.25, 0.0),
    (0.05, -4.0),
    (0.20, 0.0),
    (0.05, 6.0),
    (0.25, 0.0),
)
REMARK34_TARGET = (2.0, -1.0)


@dataclass(frozen=True, eq=False)
class GeneratedInstance:
    spec: ExperimentSpec
    problem: ProblemInstance
    x_true: FloatArray
    x0: FloatArray
    lam: float
    data_hash: str
    extras: dict[str, object] = field(default_factory=dict)


def stream(seed: int, kind: str, purpose: str) -> np.random.Generator:
    """Independent counter-based generator for one (experiment, purpose) pair."""
    key = [int(seed) & 0xFFFFFFFF, int(seed) >> 32, zlib.crc32(kind.encode()), STREAMS[purpose]]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def _gaussian_design(spec: ExperimentSpec) -> FloatArray:
    return stream(spec.seed, spec.kind, "matrix").standard_normal((spec.m, spec.n))


def _observe(spec: ExperimentSpec, A: FloatArray, x_true: FloatArray) -> FloatArray:
    noise = stream(spec.seed, spec.kind, "noise").standard_normal(spec.m)
    return A @ x_true + np.sqrt(spec.noise_var) * noise


def _penalty(spec: ExperimentSpec, A: FloatArray, b: FloatArray) -> float:
    lam = spec.lambda_c * float(np.max(np.abs(A.T @ b)))
    if not lam > 0.0:
        raise ConfigError(f"{spec.id}: lambda rule produced {lam:g}")
    return lam


def _least_squares_instance(
    spec: ExperimentSpec,
    A: FloatArray,
    x_true: FloatArray,
    make_reg: Callable[[float], RegularizerOracle],
) -> GeneratedInstance:
    b = _observe(spec, A, x_true)
    lam = _penalty(spec, A, b)
    reg = make_reg(lam)
    problem = ProblemInstance(spec.n, LeastSquaresLoss(A, b), reg, name=spec.id)
    return GeneratedInstance(
        spec=spec,
        problem=problem,
        x_true=x_true,
        x0=np.zeros(spec.n),
        lam=lam,
        data_hash=array_hash(A, b),
    )


def gen_lasso(spec: ExperimentSpec) -> GeneratedInstance:
    A = _gaussian_design(spec)
    rng = stream(spec.seed, spec.kind, "signal")
    x_true = np.zeros(spec.n)
    support = rng.choice(spec.n, size=spec.sparsity, replace=False)
    x_true[support] = rng.standard_normal(spec.sparsity)
    return _least_squares_instance(spec, A, x_true, lambda lam: L1Reg(lam, spec.n))


def gen_linf(spec: ExperimentSpec) -> GeneratedInstance:
    """Exactly ``sparsity`` coordinates at magnitude 1, the rest uniform in (-0.5, 0.5)."""
    A = _gaussian_design(spec)
    rng = stream(spec.seed, spec.kind, "signal")
    x_true = rng.uniform(-0.5, 0.5, spec.n)
    peaks = rng.choice(spec.n, size=spec.sparsity, replace=False)
    x_true[peaks] = rng.choice((-1.0, 1.0), size=spec.sparsity)
    return _least_squares_instance(spec, A, x_true, lambda lam: LInfReg(lam, spec.n))


def tv_block_signal(n: int) -> FloatArray:
    return np.repeat(np.asarray(TV_LEVELS), n // 3)


def gen_tv(spec: ExperimentSpec) -> GeneratedInstance:
    A = _gaussian_design(spec)
    return _least_squares_instance(
        spec, A, tv_block_signal(spec.n), lambda lam: TV1DReg(lam, spec.n)
    )


def ar_covariance(n: int, rho: float) -> FloatArray:
    idx = np.arange(n)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def symmetric_sqrt(matrix: FloatArray) -> FloatArray:
    eigenvalues, eigenvectors = scipy.linalg.eigh(matrix)
    root = (eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))) @ eigenvectors.T
    return 0.5 * (root + root.T)


def standardize_columns(A: FloatArray) -> FloatArray:
    centred = A - A.mean(axis=0)
    scale = centred.std(axis=0)
    if np.any(scale == 0.0):
        raise ConfigError("cannot standardize a constant column")
    return centred / scale


def oscar_signal(n: int) -> FloatArray:
    counts = [int(round(frac * n)) for frac, _ in OSCAR_BLOCKS]
    if sum(counts) != n:
        raise ConfigError(f"OSCAR block fractions do not tile n={n}")
    return np.concatenate([np.full(c, level) for c, (_, level) in zip(counts, OSCAR_BLOCKS)])


def gen_oscar(spec: ExperimentSpec) -> GeneratedInstance:
    x_true = oscar_signal(spec.n)
    raw = _gaussian_design(spec) @ symmetric_sqrt(ar_covariance(spec.n, spec.rho))
    A = standardize_columns(raw)
    return _least_squares_instance(
        spec, A, x_true, lambda lam: SortedL1Reg.oscar(lam, lam, spec.n)
    )


def gen_remark34(spec: ExperimentSpec) -> GeneratedInstance:
    """f(x) = 0.5 ||x - (2, -1)||^2 with g = ||x||_1; the minimizer is (1, 0)."""
    A = np.eye(2)
    b = np.asarray(REMARK34_TARGET)
    problem = ProblemInstance(2, LeastSquaresLoss(A, b), L1Reg(1.0, 2), name=spec.id)
    return GeneratedInstance(
        spec=spec,
        problem=problem,
        x_true=np.array([1.0, 0.0]),
        x0=np.zeros(2),
        lam=1.0,
        data_hash=array_hash(A, b),
    )


def poisson_penalty(loss: PoissonKLLoss) -> float:
    """0.5 * ||max(grad f(0), 0)||_inf."""
    grad0 = loss.gradient(np.zeros(loss.n))
    return 0.5 * float(np.max(np.maximum(grad0, 0.0)))


def gen_poisson_sr(spec: ExperimentSpec) -> GeneratedInstance:
    assert spec.n_side is not None
    rng = stream(spec.seed, spec.kind, "signal")
    x_true = np.zeros(spec.n)
    sources = rng.choice(spec.n, size=min(spec.sparsity, spec.n), replace=False)
    x_true[sources] = spec.intensity * rng.uniform(0.5, 1.5, sources.size)

    fwhm = spec.fwhm * spec.q  # high-resolution pixels
    empty = np.zeros(spec.m)
    geometry = PoissonKLLoss.from_geometry(spec.n_side, spec.q, fwhm, empty, spec.background)
    mean = geometry.intensity(x_true)
    counts = stream(spec.seed, spec.kind, "counts").poisson(mean).astype(np.float64)
    loss = PoissonKLLoss.from_geometry(spec.n_side, spec.q, fwhm, counts, spec.background)
    lam = poisson_penalty(loss)
    if not lam > 0.0:
        raise ConfigError(f"{spec.id}: Poisson penalty rule produced {lam:g}")
    problem = ProblemInstance(spec.n, loss, NonnegL1Reg(lam, spec.n), name=spec.id)
    x0 = np.asarray(loss.forward.T @ counts, dtype=np.float64)
    logger.debug("poisson_instance", sources=int(sources.size), lam=lam, total_counts=counts.sum())
    return GeneratedInstance(
        spec=spec,
        problem=problem,
        x_true=x_true,
        x0=x0,
        lam=lam,
        data_hash=array_hash(counts),
        extras={"counts": counts, "mean": mean},
    )


GENERATORS: dict[str, Callable[[ExperimentSpec], GeneratedInstance]] = {
    "lasso": gen_lasso,
    "linf": gen_linf,
    "tv1d": gen_tv,
    "oscar": gen_oscar,
    "poisson_sr": gen_poisson_sr,
    "remark34": gen_remark34,
}


def generate(spec: ExperimentSpec) -> GeneratedInstance:
    instance = GENERATORS[spec.kind](spec)
    logger.info(
        "instance_generated",
        experiment=spec.id,
        kind=spec.kind,
        seed=spec.seed,
        lam=instance.lam,
        data_hash=instance.data_hash[:12],
    )
    return instance


__all__ = [
    "GENERATORS",
    "GeneratedInstance",
    "ar_covariance",
    "gen_lasso",
    "gen_linf",
    "gen_oscar",
    "gen_poisson_sr",
    "gen_remark34",
    "gen_tv",
    "generate",
    "oscar_signal",
    "poisson_penalty",
    "standardize_columns",
    "stream",
    "symmetric_sqrt",
    "tv_block_signal",
]
