import itertools
import math

import numpy as np
import pytest
import scipy.sparse as sparse

from polynewt.core import ProblemInstance, kkt_residual, objective
from polynewt.errors import ConfigError, DomainError, ReferenceNotConvergedError, StepSizeError
from polynewt.losses import LeastSquaresLoss, PoissonKLLoss
from polynewt.regularizers import L1Reg, NonnegL1Reg, ZeroReg
from polynewt.solvers import (
    MomentumState,
    StepKind,
    TerminalStatus,
    backtracking_alpha,
    extrapolation_beta,
    ista_step,
    reference_solution,
    solve,
)
from schemas.solver import (
    BacktrackingStep,
    ChambolleDossal,
    FixedStep,
    LiangLuoTao,
    OriginalFista,
    SolverConfig,
)

MINIMIZER = np.array([1.0, 0.0])


@pytest.fixture
def toy_problem():
    return ProblemInstance(2, LeastSquaresLoss(np.eye(2), [2.0, -1.0]), L1Reg(1.0, 2), name="toy")


def _config(method, **kwargs):
    kwargs.setdefault("step", FixedStep(alpha=0.5))
    return SolverConfig(method=method, **kwargs)


def test_chambolle_dossal_beta():
    rule = ChambolleDossal(d=3.0)
    state = MomentumState()
    assert extrapolation_beta(rule, 1, state) == 0.0
    assert extrapolation_beta(rule, 4, state) == pytest.approx(3.0 / 7.0)


def test_liang_luo_tao_with_unit_parameters_is_original_fista():
    llt_state, fista_state = MomentumState(), MomentumState()
    for k in range(1, 6):
        llt = extrapolation_beta(LiangLuoTao(p=1.0, q=1.0), k, llt_state)
        fista = extrapolation_beta(OriginalFista(), k, fista_state)
        assert llt == pytest.approx(fista)
        if k == 1:
            assert llt_state.t == pytest.approx((1.0 + math.sqrt(5.0)) / 2.0)
            assert llt == 0.0


def test_beta_rejects_iteration_zero():
    with pytest.raises(ValueError):
        extrapolation_beta(OriginalFista(), 0, MomentumState())


def test_ista_step_at_fixed_point(toy_problem):
    y, z = ista_step(toy_problem, MINIMIZER, 0.5, certify=True)
    assert np.allclose(y, MINIMIZER)
    assert np.allclose(z, [1.0, -1.0])


def test_ista_step_rejects_bad_step(toy_problem):
    with pytest.raises(ValueError):
        ista_step(toy_problem, MINIMIZER, 0.0)


def test_backtracking_finds_the_descent_threshold():
    prob = ProblemInstance(1, LeastSquaresLoss(np.eye(1), [1.0]), ZeroReg(1))
    # the quadratic upper bound holds exactly for alpha <= 1
    assert backtracking_alpha(prob, [0.0], 8.0, 0.5) == pytest.approx(1.0)
    with pytest.raises(StepSizeError):
        backtracking_alpha(prob, [0.0], 8.0, 0.5, max_halvings=2)


def test_backtracking_keeps_iterates_in_the_domain():
    loss = PoissonKLLoss(np.eye(2), np.eye(2), [0.0, 0.0], 1.0)
    prob = ProblemInstance(2, loss, ZeroReg(2))
    x = np.array([0.5, 0.5])
    alpha = backtracking_alpha(prob, x, 100.0, 0.5)
    # f is linear here, so only the domain limits the step
    assert alpha == pytest.approx(100.0 * 0.5**7)
    assert loss.domain_check(x - alpha * loss.gradient(x))


def test_newton_ista_on_the_toy_problem(toy_problem):
    trace = solve(toy_problem, _config("newton_ista", switch_tol=0.1), [0.7, 0.3])
    assert trace.converged
    assert [rec.step_kind for rec in trace.records] == [
        StepKind.INITIAL,
        StepKind.PROX_ONLY,
        StepKind.NEWTON,
    ]
    assert np.max(np.abs(trace.x - MINIMIZER)) <= 1e-10
    assert trace.final.kkt_residual <= 1e-12
    assert trace.newton_accepted == 1
    assert trace.final.reduced_dim == 2


def test_newton_step_fires_once_the_prox_gap_is_small(toy_problem):
    trace = solve(toy_problem, _config("newton_ista", switch_tol=0.1), [0.0, 0.0])
    kinds = [rec.step_kind for rec in trace.records]
    assert kinds == [StepKind.INITIAL] + [StepKind.PROX_ONLY] * 3 + [StepKind.NEWTON]
    assert trace.converged
    assert np.allclose(trace.x, MINIMIZER, atol=1e-10)


@pytest.mark.parametrize("method", ["ista", "fista", "newton_fista"])
def test_every_method_reaches_the_minimizer(toy_problem, method):
    trace = solve(toy_problem, _config(method, switch_tol=0.1), [0.0, 0.0])
    assert trace.status is TerminalStatus.CONVERGED
    assert np.allclose(trace.x, MINIMIZER, atol=1e-7)


def test_first_order_methods_never_take_newton_steps(toy_problem):
    trace = solve(toy_problem, _config("fista"), [0.0, 0.0])
    assert trace.newton_accepted == 0
    assert trace.newton_rejected == 0
    assert all(rec.newton_report is None for rec in trace.records)


def test_smooth_quadratic_is_solved_by_one_newton_step():
    A = np.array([[2.0, 0.0], [1.0, 1.0]])
    b = np.array([1.0, 2.0])
    prob = ProblemInstance(2, LeastSquaresLoss(A, b), ZeroReg(2))
    config = SolverConfig(method="newton_ista", switch_tol=1e3)
    trace = solve(prob, config, [0.0, 0.0])
    assert trace.iterations == 1
    assert trace.records[1].step_kind is StepKind.NEWTON
    assert np.allclose(trace.x, np.linalg.solve(A, b), atol=1e-10)


def test_max_iters_status(toy_problem):
    trace = solve(toy_problem, _config("ista", max_iters=2), [0.0, 0.0])
    assert trace.status is TerminalStatus.MAX_ITERS
    assert trace.iterations == 2
    assert not trace.converged


def test_initial_point_already_optimal(toy_problem):
    trace = solve(toy_problem, _config("fista"), MINIMIZER)
    assert trace.converged
    assert trace.iterations == 0
    assert trace.final.step_kind is StepKind.INITIAL


def test_history_can_be_dropped(toy_problem):
    trace = solve(toy_problem, _config("ista", keep_history=False), [0.0, 0.0])
    assert all(rec.x is None for rec in trace.records[:-1])
    assert np.allclose(trace.final.x, trace.x)


def test_backtracking_run_records_alpha(toy_problem):
    config = SolverConfig(method="newton_fista", step=BacktrackingStep(alpha0=4.0))
    trace = solve(toy_problem, config, [0.0, 0.0])
    assert trace.converged
    assert all(rec.alpha <= 1.0 for rec in trace.records[1:])


def test_fixed_step_needs_alpha_without_lipschitz_hint():
    loss = PoissonKLLoss(np.eye(1), np.eye(1), [3.0], 1.0)
    prob = ProblemInstance(1, loss, NonnegL1Reg(1.0, 1))
    with pytest.raises(ConfigError):
        solve(prob, SolverConfig(method="ista"), [1.0])


def test_initial_point_outside_domain_is_rejected():
    loss = PoissonKLLoss(np.eye(2), np.eye(2), [1.0, 1.0], 1.0)
    prob = ProblemInstance(2, loss, NonnegL1Reg(1.0, 2))
    with pytest.raises(DomainError):
        solve(prob, _config("ista"), [-5.0, 0.0])


def test_newton_tail_converges_quadratically_on_separable_kl():
    from polynewt.diagnostics import convergence_order

    # minimizer of (x + 1) - 10 log(x + 1) + x on x >= 0 is x = 4
    eye = sparse.identity(1, format="csr")
    prob = ProblemInstance(1, PoissonKLLoss(eye, eye, [10.0], 1.0), NonnegL1Reg(1.0, 1))
    config = SolverConfig(
        method="newton_ista",
        step=FixedStep(alpha=0.5),
        switch_tol=1.0,
        kkt_tol=1e-15,
        max_iters=30,
    )
    trace = solve(prob, config, [4.5])
    assert np.allclose(trace.x, [4.0], atol=1e-12)
    order, tail = convergence_order(trace, [4.0], ceiling=1.0)
    assert tail >= 3
    assert order >= 1.5


def _lasso_by_enumeration(A, b, lam):
    """Best candidate over all sign patterns that satisfies the optimality conditions."""
    n = A.shape[1]
    best, best_value = None, math.inf
    for pattern in itertools.product((-1.0, 0.0, 1.0), repeat=n):
        signs = np.array(pattern)
        support = np.flatnonzero(signs)
        x = np.zeros(n)
        if support.size:
            As = A[:, support]
            x[support] = np.linalg.solve(As.T @ As, As.T @ b - lam * signs[support])
            if np.any(np.sign(x[support]) != signs[support]):
                continue
        correlation = A.T @ (b - A @ x)
        off = np.setdiff1d(np.arange(n), support)
        if np.any(np.abs(correlation[off]) > lam + 1e-10):
            continue
        value = 0.5 * np.sum((A @ x - b) ** 2) + lam * np.abs(x).sum()
        if value < best_value:
            best, best_value = x, value
    return best


def test_tiny_lasso_matches_sign_pattern_enumeration():
    rng = np.random.default_rng(21)
    A = rng.normal(size=(8, 4))
    b = rng.normal(size=8)
    lam = 0.3 * float(np.max(np.abs(A.T @ b)))
    prob = ProblemInstance(4, LeastSquaresLoss(A, b), L1Reg(lam, 4))
    expected = _lasso_by_enumeration(A, b, lam)
    assert np.allclose(reference_solution(prob), expected, atol=1e-8)
    trace = solve(prob, SolverConfig(method="newton_fista", kkt_tol=1e-12), np.zeros(4))
    assert trace.converged
    assert np.allclose(trace.x, expected, atol=1e-8)
    assert objective(prob, trace.x) == pytest.approx(objective(prob, expected), rel=1e-10)


def test_reference_solution_on_toy(toy_problem):
    x = reference_solution(toy_problem)
    assert np.allclose(x, MINIMIZER, atol=1e-10)
    assert kkt_residual(toy_problem, x, 1.0) <= 1e-11


def test_reference_solution_reports_budget_exhaustion():
    A = np.array([[2.0, 1.0], [1.0, 1.0]])
    prob = ProblemInstance(2, LeastSquaresLoss(A, [1.0, 2.0]), L1Reg(0.1, 2))
    with pytest.raises(ReferenceNotConvergedError) as excinfo:
        reference_solution(prob, max_iters=1)
    assert excinfo.value.best_x is not None
    assert excinfo.value.residual > 1e-12


def _small_lasso(seed=5, m=12, n=20):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(m, n))
    b = rng.normal(size=m)
    lam = 0.2 * float(np.max(np.abs(A.T @ b)))
    return ProblemInstance(n, LeastSquaresLoss(A, b), L1Reg(lam, n), name="small_lasso")


def test_switch_gap_is_measured_from_the_current_iterate():
    prob = _small_lasso()
    trace = solve(prob, SolverConfig(method="fista", max_iters=40), np.zeros(prob.n))
    for previous, record in zip(trace.records, trace.records[1:]):
        # prox-only steps set x_k = y_k, so the gap is ||x_{k-1} - x_k||
        assert record.prox_gap == pytest.approx(float(np.linalg.norm(previous.x - record.x)))


def test_momentum_restarts_after_an_accepted_newton_step(monkeypatch):
    from polynewt import solvers

    starts = []

    def recording_ista_step(prob, x, alpha, **kwargs):
        starts.append(np.array(x, dtype=float))
        return ista_step(prob, x, alpha, **kwargs)

    monkeypatch.setattr(solvers, "ista_step", recording_ista_step)
    eye = sparse.identity(1, format="csr")
    prob = ProblemInstance(1, PoissonKLLoss(eye, eye, [10.0], 1.0), NonnegL1Reg(1.0, 1))
    config = SolverConfig(
        method="newton_fista",
        step=FixedStep(alpha=0.5),
        switch_tol=1.0,
        kkt_tol=1e-15,
        max_iters=30,
    )
    trace = solve(prob, config, [4.5])
    newton_ks = [rec.k for rec in trace.records if rec.step_kind is StepKind.NEWTON]
    assert newton_ks
    following = [k for k in newton_ks if k < trace.iterations]
    assert following
    for k in following:
        # iteration k + 1 starts from x_k itself, without extrapolation
        assert np.array_equal(starts[k], trace.records[k].x)


def test_safeguard_requires_a_strict_decrease(toy_problem):
    from polynewt.solvers import _newton_attempt

    y, z = ista_step(toy_problem, MINIMIZER, 0.5)
    guarded = _config("newton_ista")
    x_next, kind, report, _ = _newton_attempt(toy_problem, guarded, y, z, 0.5, 1)
    assert report is not None and np.allclose(report.direction, 0.0)
    assert kind is StepKind.NEWTON_REJECTED
    assert np.array_equal(x_next, y)

    bare = _config("newton_ista", safeguard=False)
    _, kind, _, _ = _newton_attempt(toy_problem, bare, y, z, 0.5, 1)
    assert kind is StepKind.NEWTON


def test_newton_steps_on_a_partial_subspace():
    prob = _small_lasso(seed=8)
    trace = solve(prob, SolverConfig(method="newton_fista", kkt_tol=1e-12), np.zeros(prob.n))
    assert trace.converged
    assert trace.newton_accepted >= 1
    for record in trace.records:
        if record.step_kind is StepKind.NEWTON:
            assert 1 <= record.newton_report.reduced_dim < prob.n
            assert record.newton_report.residual_in_Lperp <= 1e-6
