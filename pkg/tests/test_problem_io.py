import json
from pathlib import Path

import numpy as np
import pytest

from polynewt.core import ProblemInstance
from polynewt.errors import ConfigError
from polynewt.losses import LeastSquaresLoss, PoissonKLLoss
from polynewt.problem_io import (
    build_regularizer,
    dump_problem,
    load_problem,
    problem_spec,
    read_json,
)
from polynewt.regularizers import L1Reg, SortedL1Reg, TV1DReg
from schemas.problem import RegSpec

FIXTURES = Path(__file__).resolve().parents[1] / "data" / "fixtures"


def test_loads_the_two_by_two_fixture():
    prob = load_problem(FIXTURES / "remark34.json")
    assert prob.name == "remark34"
    assert prob.n == 2
    assert isinstance(prob.reg, L1Reg)
    assert prob.reg.scale == pytest.approx(1.0)
    assert np.allclose(prob.loss.gradient(np.zeros(2)), [-2.0, 1.0])


def test_dump_and_reload_inline(tmp_path):
    rng = np.random.default_rng(2)
    A, b = rng.normal(size=(5, 4)), rng.normal(size=5)
    prob = ProblemInstance(4, LeastSquaresLoss(A, b), TV1DReg(0.25, 4), name="tv")
    path = dump_problem(prob, tmp_path / "tv.json")
    loaded = load_problem(path)
    assert isinstance(loaded.reg, TV1DReg)
    assert loaded.reg.scale == pytest.approx(0.25)
    assert np.array_equal(loaded.loss.A, A)
    assert json.loads(path.read_text())["reg"]["lambda"] == pytest.approx(0.25)


def test_dump_binary_writes_side_files(tmp_path):
    rng = np.random.default_rng(3)
    A, b = rng.normal(size=(6, 3)), rng.normal(size=6)
    prob = ProblemInstance(3, LeastSquaresLoss(A, b), L1Reg(0.5, 3), name="bin")
    path = dump_problem(prob, tmp_path / "bin.json", binary=True)
    assert (tmp_path / "bin_A.bin").stat().st_size == 6 * 3 * 8
    assert (tmp_path / "bin_b.bin").is_file()
    document = json.loads(path.read_text())
    assert document["loss"]["shape"] == [6, 3]
    assert document["loss"]["A"] is None
    loaded = load_problem(path)
    assert np.array_equal(loaded.loss.A, A)
    assert np.array_equal(loaded.loss.b, b)


def test_truncated_side_file_is_reported(tmp_path):
    prob = ProblemInstance(2, LeastSquaresLoss(np.eye(2), [1.0, 1.0]), L1Reg(1.0, 2))
    path = dump_problem(prob, tmp_path / "p.json", binary=True)
    (tmp_path / "p_A.bin").write_bytes(b"\x00" * 8)
    with pytest.raises(ConfigError, match="expected 4"):
        load_problem(path)


def test_poisson_problem_is_stored_by_geometry(tmp_path):
    counts = np.arange(16, dtype=float)
    loss = PoissonKLLoss.from_geometry(8, 2, 1.5, counts, background=2.0)
    prob = ProblemInstance(64, loss, L1Reg(0.1, 64), name="sr")
    spec = problem_spec(prob)
    assert spec.loss.kind == "poisson_kl"
    assert spec.loss.background == pytest.approx(2.0)
    loaded = load_problem(dump_problem(prob, tmp_path / "sr.json"))
    assert loaded.loss.geometry == (8, 2, 1.5)
    x = np.full(64, 0.5)
    assert loaded.loss.value(x) == pytest.approx(loss.value(x))


def test_poisson_without_geometry_cannot_be_serialized():
    loss = PoissonKLLoss(np.eye(2), np.eye(2), [1.0, 2.0], 1.0)
    with pytest.raises(ConfigError):
        problem_spec(ProblemInstance(2, loss, L1Reg(1.0, 2)))


def test_read_json_reports_position(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "n": 2,\n  oops\n}\n')
    with pytest.raises(ConfigError) as excinfo:
        read_json(bad)
    assert f"{bad}:3:3:" in str(excinfo.value)


def test_read_json_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="no such file"):
        read_json(tmp_path / "absent.json")


def test_invalid_document_becomes_config_error(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"n": 2, "loss": {"kind": "least_squares"}, "reg": {"kind": "l1"}}))
    with pytest.raises(ConfigError):
        load_problem(path)


def test_build_regularizer_for_sorted_kinds():
    oscar = build_regularizer(RegSpec(kind="oscar", w1=1.0, w2=0.5, **{"lambda": 2.0}), 3)
    assert isinstance(oscar, SortedL1Reg)
    assert oscar.describe() == {"kind": "oscar", "lambda": 2.0, "w1": 1.0, "w2": 0.5}
    slope = build_regularizer(RegSpec(kind="slope", weights=[3.0, 2.0, 1.0]), 3)
    assert slope.describe()["weights"] == [3.0, 2.0, 1.0]
    with pytest.raises(ConfigError, match="needs 4 weights"):
        build_regularizer(RegSpec(kind="slope", weights=[3.0, 2.0, 1.0]), 4)
