import importlib.util
import json
from pathlib import Path

import numpy as np
import pytest

from polynewt.bench.generators import (
    ar_covariance,
    generate,
    oscar_signal,
    standardize_columns,
    stream,
    symmetric_sqrt,
    tv_block_signal,
)
from polynewt.bench.suite import run_suite, summary_hash
from polynewt.core import ProblemInstance
from polynewt.diagnostics import convergence_order, newton_pairs
from polynewt.errors import ConfigError, InsufficientTailError
from polynewt.losses import LeastSquaresLoss
from polynewt.regularizers import L1Reg, NonnegL1Reg, TV1DReg
from polynewt.solvers import reference_solution, solve
from schemas.experiment import ExperimentSpec, ResultRecord
from schemas.solver import FixedStep, SolverConfig
from tools.recorder import (
    NDJSONRecorder,
    TRACE_COLUMNS,
    read_trace_csv,
    summarize_trace_rows,
    write_trace_csv,
)
from tools.suites import SuiteRegistry, describe

ROOT = Path(__file__).resolve().parents[1]
SUITES = ROOT / "config" / "suites.yaml"
COUNTERPARTS = {
    "Newton_ISTA": "ISTA",
    "Newton_FISTA": "FISTA",
    "Newton_BT_ISTA": "BT_ISTA",
    "Newton_BT_FISTA": "BT_FISTA",
}


@pytest.fixture
def registry():
    return SuiteRegistry.from_yaml(SUITES)


@pytest.fixture
def toy_specs(registry):
    return registry.experiments("toy")


def test_streams_are_reproducible_and_independent():
    first = stream(7, "lasso", "matrix").standard_normal(5)
    again = stream(7, "lasso", "matrix").standard_normal(5)
    assert np.array_equal(first, again)
    assert not np.array_equal(first, stream(7, "lasso", "noise").standard_normal(5))
    assert not np.array_equal(first, stream(7, "linf", "matrix").standard_normal(5))
    assert not np.array_equal(first, stream(8, "lasso", "matrix").standard_normal(5))


def test_generation_is_deterministic():
    spec = ExperimentSpec(id="lasso", kind="lasso", m=12, n=20, sparsity=3, seed=5)
    first, second = generate(spec), generate(spec)
    assert first.data_hash == second.data_hash
    assert np.array_equal(first.x_true, second.x_true)
    assert np.count_nonzero(first.x_true) == 3
    assert first.lam == pytest.approx(0.1 * np.max(np.abs(first.problem.loss.atb)))


def test_linf_signal_has_exactly_the_requested_peaks():
    spec = ExperimentSpec(id="linf", kind="linf", m=15, n=16, sparsity=4, seed=3)
    x_true = generate(spec).x_true
    assert np.sum(np.abs(x_true) == 1.0) == 4
    assert np.max(np.abs(x_true[np.abs(x_true) != 1.0])) < 0.5


def test_tv_block_signal_levels():
    signal = tv_block_signal(9)
    assert np.allclose(signal, [0.5] * 3 + [-0.3] * 3 + [0.8] * 3)
    # jumps 0.8 and 1.1
    assert TV1DReg(2.0, 9).value(signal) == pytest.approx(2.0 * 1.9)


def test_ar_covariance_and_its_square_root():
    cov = ar_covariance(4, 0.5)
    assert cov[0, 3] == pytest.approx(0.125)
    root = symmetric_sqrt(cov)
    assert np.allclose(root, root.T)
    assert np.allclose(root @ root, cov)


def test_standardized_columns():
    rng = np.random.default_rng(1)
    A = standardize_columns(rng.normal(3.0, 2.0, size=(50, 4)))
    assert np.allclose(A.mean(axis=0), 0.0, atol=1e-12)
    assert np.allclose(A.std(axis=0), 1.0)
    with pytest.raises(ConfigError):
        standardize_columns(np.ones((5, 2)))


def test_oscar_signal_blocks():
    signal = oscar_signal(300)
    assert signal.size == 300
    assert np.count_nonzero(signal == 3.0) == 15
    assert np.count_nonzero(signal == -4.0) == 15
    assert np.count_nonzero(signal == 6.0) == 15
    assert np.count_nonzero(signal) == 45
    with pytest.raises(ConfigError):
        oscar_signal(7)


def test_poisson_instance():
    spec = ExperimentSpec(
        id="sr", kind="poisson_sr", m=16, n=64, n_side=8, q=2, sparsity=3, seed=2
    )
    instance = generate(spec)
    counts = instance.extras["counts"]
    assert isinstance(instance.problem.reg, NonnegL1Reg)
    assert instance.lam > 0.0
    assert np.count_nonzero(instance.x_true) == 3
    assert np.all(counts >= 0.0)
    assert np.allclose(instance.x0, instance.problem.loss.forward.T @ counts)


def test_poisson_suite_blur_is_given_in_low_resolution_pixels(registry):
    (spec,) = registry.experiments("poisson")
    assert spec.fwhm == 2.5
    assert spec.q == 2
    assert generate(spec).problem.loss.geometry == (16, 2, 5.0)


def test_remark34_instance(toy_specs):
    instance = generate(toy_specs[0])
    assert instance.lam == 1.0
    assert np.allclose(instance.x_true, [1.0, 0.0])


def test_registry_lists_the_shipped_suites(registry):
    assert {"paper51", "toy", "poisson"} <= set(registry.names())
    assert [spec.id for spec in registry.experiments("paper51")] == [
        "lasso",
        "linf",
        "tv1d",
        "oscar",
    ]
    assert set(registry.get("paper51").experiments[0].solvers) == {
        "ISTA",
        "FISTA",
        "Newton_ISTA",
        "Newton_FISTA",
        "BT_ISTA",
        "BT_FISTA",
        "Newton_BT_ISTA",
        "Newton_BT_FISTA",
    }
    entry = next(item for item in describe(registry) if item["name"] == "toy")
    assert entry["experiments"] == ["remark34"]


def test_registry_labels_match_configurations(registry):
    for name in registry.names():
        for spec in registry.experiments(name):
            for label, config in spec.solvers.items():
                assert config.label == label


def test_registry_seed_override(registry):
    specs = registry.experiments("paper51", seed=99)
    assert {spec.seed for spec in specs} == {99}
    assert registry.get("paper51").experiments[0].seed == 7


def test_registry_errors(registry, tmp_path):
    with pytest.raises(ConfigError, match="unknown suite"):
        registry.get("nope")
    with pytest.raises(ConfigError):
        SuiteRegistry.from_yaml(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("suites:\n  s:\n    experiments:\n      - id: x\n        kind: nope\n")
    with pytest.raises(ConfigError, match="suite 's'"):
        SuiteRegistry.from_yaml(bad)


def test_trace_csv_round_trip(tmp_path):
    prob = ProblemInstance(2, LeastSquaresLoss(np.eye(2), [2.0, -1.0]), L1Reg(1.0, 2))
    config = SolverConfig(method="newton_ista", step=FixedStep(alpha=0.5), switch_tol=0.1)
    trace = solve(prob, config, [0.0, 0.0])
    path = write_trace_csv(trace, tmp_path / "run.trace.csv", prob, np.array([1.0, 0.0]))
    rows = read_trace_csv(path)
    assert list(rows[0]) == list(TRACE_COLUMNS)
    assert len(rows) == len(trace.records)
    assert float(rows[-1]["dist_to_ref"]) <= 1e-10
    assert rows[-1]["fallback"] == "none"
    summary = summarize_trace_rows(rows)
    assert summary["iterations"] == trace.iterations
    assert summary["step_kinds"]["newton"] == 1


def test_read_trace_csv_rejects_other_tables(tmp_path):
    path = tmp_path / "other.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="not a trace file"):
        read_trace_csv(path)
    assert summarize_trace_rows([])["iterations"] == 0


def test_ndjson_recorder(tmp_path):
    path = tmp_path / "out.ndjson"
    with NDJSONRecorder(path) as recorder:
        recorder.write({"value": float("nan")})
        recorder.write({"value": 1})
    assert recorder.total_written == 2
    lines = path.read_text().splitlines()
    assert [json.loads(line)["value"] for line in lines] == ["nan", 1]
    with pytest.raises(RuntimeError):
        recorder.write({})


def test_summary_hash_ignores_wall_time():
    record = ResultRecord(
        experiment_id="e",
        method="ISTA",
        seed=0,
        status="converged",
        converged=True,
        iterations=3,
        terminal_kkt=1e-9,
        terminal_objective=1.0,
        wall_time_ns=10,
    )
    slower = record.model_copy(update={"wall_time_ns": 99_999})
    assert summary_hash([record]) == summary_hash([slower])
    assert summary_hash([record]) != summary_hash([record.model_copy(update={"iterations": 4})])


def test_toy_suite_run(tmp_path, toy_specs):
    result = run_suite(toy_specs, tmp_path / "first", threads=2, name="toy")
    assert result.all_converged
    assert result.failures == []
    assert {rec.method for rec in result.records} == {
        "ISTA",
        "FISTA",
        "Newton_ISTA",
        "Newton_FISTA",
    }
    for rec in result.records:
        assert rec.reference_source == "fista"
        assert rec.dist_to_ref <= 1e-6
        if rec.method.startswith("Newton_"):
            assert rec.newton_steps_accepted >= 1
            assert rec.dist_to_ref <= 1e-10
    assert result.metrics.runs_started == 4
    assert result.metrics.runs_converged == 4

    out = tmp_path / "first"
    for name in ("summary.csv", "summary.json", "results.ndjson"):
        assert (out / name).is_file()
    run_dir = out / "remark34"
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["seed"] == 0
    assert manifest["streams"]["matrix"] == 1
    assert (run_dir / "ground_truth.json").is_file()
    assert (run_dir / "Newton_FISTA.trace.csv").is_file()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["summary_hash"] == result.summary_hash
    assert len((out / "results.ndjson").read_text().splitlines()) == 4

    again = run_suite(toy_specs, tmp_path / "second", threads=1, name="toy")
    assert again.summary_hash == result.summary_hash


def test_empty_suite(tmp_path):
    result = run_suite([], tmp_path, name="empty")
    assert result.records == []
    assert result.all_converged
    assert (tmp_path / "summary.csv").read_text().startswith("experiment_id,")


@pytest.mark.slow
def test_poisson_suite_writes_images(tmp_path, registry):
    result = run_suite(registry.experiments("poisson"), tmp_path, name="poisson")
    run_dir = tmp_path / "poisson_sr"
    assert len(result.records) == 4
    assert (run_dir / "BT_FISTA.png").is_file()
    assert (run_dir / "BT_FISTA.reconstruction.csv").is_file()
    assert all(rec.error is None for rec in result.records)


@pytest.mark.slow
def test_least_squares_suite_newton_beats_first_order(tmp_path, registry):
    result = run_suite(registry.experiments("paper51"), tmp_path, name="paper51")
    assert result.failures == []
    by_key = {(rec.experiment_id, rec.method): rec for rec in result.records}
    assert {experiment for experiment, _ in by_key} == {"lasso", "linf", "tv1d", "oscar"}
    for (experiment, method), rec in by_key.items():
        assert rec.error is None, (experiment, method, rec.error)
        if method not in COUNTERPARTS:
            continue
        base = by_key[(experiment, COUNTERPARTS[method])]
        assert rec.converged, (experiment, method, rec.terminal_kkt)
        assert rec.terminal_kkt <= 1e-8
        assert rec.iterations < base.iterations, (experiment, method, base.iterations)
    assert all(rec.converged for rec in result.records if rec.experiment_id == "tv1d")


@pytest.mark.slow
def test_lasso_newton_tail_is_quadratic(registry):
    (spec,) = [spec for spec in registry.experiments("paper51") if spec.id == "lasso"]
    instance = generate(spec)
    prob = instance.problem
    trace = solve(prob, spec.solvers["Newton_FISTA"], instance.x0)
    assert trace.converged
    assert trace.newton_accepted >= 1
    x_ref = reference_solution(prob, spec.reference_tol)
    assert np.max(np.abs(trace.x - x_ref)) <= 1e-6
    try:
        order, points = convergence_order(trace, x_ref)
    except InsufficientTailError:
        # quadratic loss: once the support is identified one step lands on the minimizer
        _, before, after = newton_pairs(trace, x_ref)[-1]
        assert after <= max(before**2, 1e-9)
    else:
        assert points >= 3
        assert order >= 1.8


def test_determinism_script_on_the_toy_suite(capsys):
    path = ROOT / "scripts" / "check_determinism.py"
    module_spec = importlib.util.spec_from_file_location("check_determinism", path)
    module = importlib.util.module_from_spec(module_spec)
    module_spec.loader.exec_module(module)
    assert module.main(["--suite", "toy", "--suites", str(SUITES)]) == 0
    assert capsys.readouterr().out.strip().endswith("deterministic")
