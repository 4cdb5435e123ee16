import numpy as np
import pytest

from polynewt.core import (
    ProblemInstance,
    SubspaceBasis,
    fenchel_young_check,
    kkt_residual,
    kkt_residual_ls,
    objective,
)
from polynewt.errors import ConfigError, DualInfeasibleError
from polynewt.losses import LeastSquaresLoss, PoissonKLLoss
from polynewt.regularizers import L1Reg, LInfReg, NonnegL1Reg, SortedL1Reg, TV1DReg, ZeroReg
from polynewt.regularizers.l1 import l1_prox


@pytest.fixture
def toy_problem():
    loss = LeastSquaresLoss(np.eye(2), [2.0, -1.0])
    return ProblemInstance(2, loss, L1Reg(1.0, 2), name="toy")


def test_spanning_set_drops_redundant_columns():
    vectors = np.array([[1.0, 0.0, 1.0], [1.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
    basis = SubspaceBasis.from_spanning_set(vectors, 3)
    assert basis.r == 1
    assert np.allclose(basis.basis.T @ basis.basis, np.eye(1))
    assert basis.contains([2.0, 2.0, 0.0])
    assert not basis.contains([1.0, 0.0, 0.0])


def test_spanning_set_of_nothing_is_zero_subspace():
    assert SubspaceBasis.from_spanning_set(np.zeros((4, 0)), 4).r == 0
    assert SubspaceBasis.from_spanning_set(np.zeros((4, 2)), 4).r == 0


def test_subspace_distance_and_projection():
    full = SubspaceBasis.full(3)
    coords = SubspaceBasis.coordinate(3, [2, 0, 2])
    assert coords.r == 2
    assert np.allclose(coords.project([1.0, 5.0, -2.0]), [1.0, 0.0, -2.0])
    assert full.distance(coords) == pytest.approx(1.0)
    assert coords.equals(SubspaceBasis.from_spanning_set(np.array([[1, 0, 1], [1, 0, -1]]).T, 3))


def test_same_span_from_different_spanning_sets_has_zero_distance():
    rng = np.random.default_rng(11)
    for n, r in [(6, 3), (40, 12), (128, 60)]:
        vectors = rng.normal(size=(n, r))
        first = SubspaceBasis.from_spanning_set(vectors, n)
        second = SubspaceBasis.from_spanning_set(vectors @ rng.normal(size=(r, r)), n)
        assert first.distance(second) <= 1e-10
        assert first.equals(second)
        assert first.distance(second) == pytest.approx(second.distance(first), abs=1e-12)


def test_distance_matches_projector_difference():
    rng = np.random.default_rng(12)
    first = SubspaceBasis.from_spanning_set(rng.normal(size=(7, 3)), 7)
    second = SubspaceBasis.from_spanning_set(rng.normal(size=(7, 4)), 7)
    expected = np.linalg.norm(first.projector() - second.projector(), "fro")
    assert first.distance(second) == pytest.approx(expected, rel=1e-10)
    assert first.distance(SubspaceBasis.zero(7)) == pytest.approx(np.sqrt(3.0))


def test_basis_is_read_only():
    basis = SubspaceBasis.full(2)
    with pytest.raises(ValueError):
        basis.basis[0, 0] = 3.0


def test_objective_at_known_minimizer(toy_problem):
    assert objective(toy_problem, [1.0, 0.0]) == pytest.approx(2.0)


def test_objective_is_infinite_outside_regularizer_domain():
    loss = LeastSquaresLoss(np.eye(2), [1.0, 1.0])
    prob = ProblemInstance(2, loss, NonnegL1Reg(1.0, 2))
    assert objective(prob, [-1.0, 0.0]) == float("inf")


@pytest.mark.parametrize("alpha", [0.25, 0.5, 1.0])
def test_kkt_residual_vanishes_at_minimizer(toy_problem, alpha):
    assert kkt_residual(toy_problem, [1.0, 0.0], alpha) <= 1e-14


def test_kkt_residual_without_regularizer():
    prob = ProblemInstance(3, LeastSquaresLoss(np.eye(3), np.zeros(3)), ZeroReg(3))
    assert kkt_residual(prob, [1.0, 0.0, 0.0], 1.0) == pytest.approx(1.0 / 3.0)


def test_least_squares_residual_uses_model_misfit(toy_problem):
    # x - prox(x - grad) = (0, 0) - (1, 0); ||Ax - b|| = sqrt(5)
    assert kkt_residual_ls(toy_problem, [0.0, 0.0]) == pytest.approx(1.0 / (1.0 + np.sqrt(5.0)))


def test_least_squares_residual_rejects_other_losses():
    loss = PoissonKLLoss(np.eye(2), np.eye(2), [1.0, 2.0], 1.0)
    prob = ProblemInstance(2, loss, NonnegL1Reg(1.0, 2))
    with pytest.raises(ConfigError):
        kkt_residual_ls(prob, [1.0, 1.0])


def test_problem_rejects_dimension_mismatch():
    with pytest.raises(ConfigError):
        ProblemInstance(3, LeastSquaresLoss(np.eye(2), [1.0, 1.0]), L1Reg(1.0))
    with pytest.raises(ConfigError):
        ProblemInstance(2, LeastSquaresLoss(np.eye(2), [1.0, 1.0]), L1Reg(1.0, 3))


def test_regularizer_scale_must_be_positive():
    with pytest.raises(ConfigError):
        L1Reg(0.0)
    with pytest.raises(ConfigError):
        L1Reg(float("nan"))


def test_scale_law_for_every_family():
    rng = np.random.default_rng(7)
    n, lam, alpha = 5, 2.5, 0.3
    pairs = [
        (L1Reg(lam, n), L1Reg(1.0, n)),
        (LInfReg(lam, n), LInfReg(1.0, n)),
        (SortedL1Reg([3.0, 2.0, 2.0, 1.0, 0.5], lam), SortedL1Reg([3.0, 2.0, 2.0, 1.0, 0.5])),
        (TV1DReg(lam, n), TV1DReg(1.0, n)),
        (NonnegL1Reg(lam, n), NonnegL1Reg(1.0, n)),
    ]
    for scaled, base in pairs:
        x = rng.normal(size=n)
        assert scaled.value(np.abs(x)) == pytest.approx(lam * base.value(np.abs(x)))
        assert np.allclose(scaled.prox(x, alpha), base.prox(x, lam * alpha))
        z = scaled.project_dual(rng.normal(size=n) * 4)
        assert scaled.effective_subspace(z).equals(base.effective_subspace(z / lam))


def test_project_dual_is_moreau_complement():
    reg = L1Reg(1.0, 2)
    assert np.allclose(reg.project_dual([2.0, -0.5]), [1.0, -0.5])
    assert reg.dual_domain_check(reg.project_dual([7.0, -3.0]))


def test_conjugate_is_an_indicator():
    reg = L1Reg(1.0, 2)
    assert reg.conjugate([0.5, -1.0]) == 0.0
    assert reg.conjugate([1.5, 0.0]) == float("inf")


def test_effective_subspace_rejects_infeasible_point():
    with pytest.raises(DualInfeasibleError):
        L1Reg(1.0, 2).effective_subspace([3.0, 0.0])


def test_fenchel_young_check():
    reg = L1Reg(1.0, 2)
    assert fenchel_young_check(reg, [1.0, 0.0], [1.0, -1.0])
    assert fenchel_young_check(reg, [1.0, 0.0], [1.0, 0.3])
    assert not fenchel_young_check(reg, [1.0, 0.0], [0.5, 0.0])
    assert not fenchel_young_check(reg, [1.0, 0.0], [1.5, 0.0])


def test_fenchel_young_check_rejects_nonfinite_input():
    with pytest.raises(ValueError):
        fenchel_young_check(L1Reg(1.0, 2), [np.nan, 0.0], [0.0, 0.0])


def test_prox_rejects_nonpositive_step():
    with pytest.raises(ValueError):
        L1Reg(1.0).prox([1.0], 0.0)
    with pytest.raises(ValueError):
        l1_prox([1.0], -1.0)
