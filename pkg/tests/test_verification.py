"""Reference solves, hypergradients, diagnostics and bound checks."""

import numpy as np
import pytest

from distributed_bilevel.constants import auto_stepsizes, derive_constants, stepsize_caps
from distributed_bilevel.network import metropolis_weights, ring
from distributed_bilevel.problems import make_minmax, make_quadratic_saddle, make_synthetic_quadratic
from distributed_bilevel.solver import init_state, run
from distributed_bilevel.state_network import MixingMatrix
from distributed_bilevel.state_solver import OracleFlag, SolverState, StepSizes
from distributed_bilevel.verification import (
    check_bounds,
    consensus_error,
    finite_diff_hypergradient,
    heterogeneity,
    hyper_objective,
    hypergradient,
    inner_solve,
    make_monitor,
    metrics,
    penalized_inner_solve,
    penalty_gap_checks,
    relative_error,
    run_centralized,
)

LAMBDAS = (5.0, 10.0, 20.0, 40.0, 80.0)


@pytest.fixture
def saddle():
    return make_quadratic_saddle([1, 1, 1, 1, 1], [1, 1, 1, 1, 1], [2, 2, 3, 3, 4], [1, 0, -1, 0, 1])


@pytest.fixture
def saddle_by_descent(saddle):
    """Same saddle without closed forms, so every solve runs gradient descent."""
    return make_minmax(saddle.outer_value, saddle.outer_grad, saddle.m, 1, 1, saddle.smoothness)


# ===== INNER SOLVES =====

def test_inner_solve_closed_form(reference_problem):
    sol = inner_solve(reference_problem, np.zeros(1))
    assert sol.closed_form
    assert sol.converged
    assert sol.y[0] == pytest.approx(3.0)


def test_penalized_solve_closed_form(reference_problem):
    sol = penalized_inner_solve(reference_problem, np.zeros(1), 20.0)
    assert sol.y[0] == pytest.approx(611.0 / 204.0)
    assert not sol.flags & OracleFlag.PENALTY_BELOW_THRESHOLD
    low = penalized_inner_solve(reference_problem, np.zeros(1), 1.0)
    assert low.flags & OracleFlag.PENALTY_BELOW_THRESHOLD


def test_inner_solve_descent_is_start_independent(logistic_problem, rng):
    x = rng.uniform(-1, 1, logistic_problem.n)
    tol = 1e-10
    a = inner_solve(logistic_problem, x, tol, y0=np.zeros(logistic_problem.r))
    b = inner_solve(logistic_problem, x, tol, y0=np.ones(logistic_problem.r))
    assert a.converged and b.converged
    assert not a.closed_form
    mu = logistic_problem.inner_moduli(x)[0]
    assert np.linalg.norm(a.y - b.y) <= 2.0 * tol / mu


def test_inner_solve_reports_non_convergence(logistic_problem):
    sol = inner_solve(logistic_problem, np.zeros(logistic_problem.n), 1e-12, max_iter=2)
    assert not sol.converged
    assert sol.flags & OracleFlag.INNER_NOT_CONVERGED


def test_inner_solve_rejects_bad_tolerance(reference_problem):
    with pytest.raises(ValueError):
        inner_solve(reference_problem, np.zeros(1), 0.0)

# ===== PENALTY GAPS =====

def test_penalty_gap_at_origin_matches_closed_form(reference_problem):
    x0 = np.zeros(1)
    y_star = inner_solve(reference_problem, x0).y
    for lam in LAMBDAS:
        gap = np.linalg.norm(y_star - penalized_inner_solve(reference_problem, x0, lam).y)
        assert gap == pytest.approx(1.0 / (4.0 + 10.0 * lam), abs=1e-8)


def test_penalty_gap_bounds_hold_at_random_points(reference_problem, rng):
    xs = [rng.uniform(-2, 2, 1) for _ in range(20)]
    for lam in LAMBDAS:
        c = derive_constants(reference_problem.smoothness, lam)
        checks = penalty_gap_checks(reference_problem, c, xs)
        assert len(checks) == 40
        assert all(check.passed for check in checks)


def test_penalty_gap_halves_when_lambda_doubles(reference_problem):
    x0 = np.zeros(1)
    y_star = inner_solve(reference_problem, x0).y
    gaps = [float(np.linalg.norm(y_star - penalized_inner_solve(reference_problem, x0, lam).y)) for lam in LAMBDAS]
    for coarse, fine in zip(gaps, gaps[1:]):
        assert 1.5 <= coarse / fine <= 2.5


def test_minmax_penalty_gap_vanishes(saddle, saddle_by_descent, rng):
    for problem in (saddle, saddle_by_descent):
        for _ in range(10):
            x = rng.uniform(-2, 2, 1)
            y_star = inner_solve(problem, x).y
            for lam in (1.0, 2.0, 5.0):
                y_lam = penalized_inner_solve(problem, x, lam, y0=y_star).y
                assert np.linalg.norm(y_star - y_lam) <= 2e-8

# ===== HYPERGRADIENTS =====

def test_hyper_objective_at_optimum(reference_problem):
    # y*(0.25) = 2.75, so Phi = mean((5.5 - i)^2) / 2 over i = 1..10
    assert hyper_objective(reference_problem, np.array([0.25])) == pytest.approx(4.125)


def test_synthetic_hypergradient_values(reference_problem):
    assert hypergradient(reference_problem, np.zeros(1)).grad[0] == pytest.approx(-1.0)
    assert hypergradient(reference_problem, np.array([0.25])).grad[0] == pytest.approx(0.0, abs=1e-12)
    assert finite_diff_hypergradient(reference_problem, np.ones(1), 1e-3)[0] == pytest.approx(3.0, rel=1e-6)


def test_synthetic_hypergradient_matches_finite_differences(reference_problem, rng):
    for _ in range(10):
        x = rng.uniform(-2, 2, 1)
        implicit = hypergradient(reference_problem, x).grad
        numeric = finite_diff_hypergradient(reference_problem, x, 1e-3)
        assert relative_error(implicit, numeric) <= 1e-5


def test_logistic_hypergradient_matches_finite_differences(logistic_problem, rng):
    for _ in range(10):
        x = rng.uniform(-1, 1, logistic_problem.n)
        h = 1e-4 * (1.0 + float(np.linalg.norm(x)))
        implicit = hypergradient(logistic_problem, x, tol=1e-11).grad
        numeric = finite_diff_hypergradient(logistic_problem, x, h, tol=1e-11)
        assert relative_error(implicit, numeric) <= 1e-4


def test_hypergradient_falls_back_to_finite_differences(saddle, saddle_by_descent):
    x = np.array([0.3])
    fallback = hypergradient(saddle_by_descent, x)
    assert fallback.flags & OracleFlag.HYPERGRADIENT_FINITE_DIFF
    assert fallback.grad == pytest.approx(hypergradient(saddle, x).grad, rel=1e-5)


def test_failed_hypergradient_is_flagged_not_fatal(saddle):
    # curvature oracle reports a concave inner problem, so the Cholesky solve fails
    problem = make_minmax(
        saddle.outer_value,
        saddle.outer_grad,
        saddle.m,
        1,
        1,
        saddle.smoothness,
        f_second=lambda i, x, y: (np.array([[1.0]]), np.array([[2.0]])),
        exact_inner_argmin=saddle.exact_inner_argmin,
    )
    mixing = metropolis_weights(ring(5))
    p = StepSizes(alpha=1e-3, beta=1e-3, gamma=1e-2, lam=2.0, K=3)
    c = derive_constants(problem.smoothness, 2.0)
    log = run(problem, mixing, p, init_state(problem, mixing), 1, make_monitor(problem, mixing, p, c))
    assert log.completed
    for r in log.records:
        assert r.flags & OracleFlag.HYPERGRADIENT_FAILED
        assert np.isnan(r.grad_phi_sq)
        assert np.isnan(r.grad_approx_sq)

    report = check_bounds(log, problem, c, p, mixing.rho, heterogeneity(problem, log.trajectory))
    assert len(report.by_name("inner_penalty_gap")) == 4
    assert report.by_name("outer_penalty_gap") == []
    assert report.by_name("gradient_approximation") == []
    assert report.by_name("averaged_rate") == []
    assert any("hypergradient failed at 4 record(s)" in notice for notice in report.notices)


def test_hypergradient_uses_second_order_only_while_verifying(reference_problem):
    hypergradient(reference_problem, np.zeros(1))
    assert reference_problem.second_order_calls == 0
    assert reference_problem.verification_second_order_calls == reference_problem.m

# ===== DIAGNOSTICS =====

def consensus_state(problem, x, y, z, k=0):
    m = problem.m
    return SolverState(x=np.tile(x, (m, 1)), y=np.tile(y, (m, 1)), z=np.tile(z, (m, 1)), k=k)


def test_metrics_at_the_optimum(reference_problem, er_mixing):
    p = StepSizes(alpha=1e-4, beta=1e-3, gamma=1e-2, lam=20.0, K=1)
    c = derive_constants(reference_problem.smoothness, 20.0)
    state = consensus_state(reference_problem, [0.25], [2.75], [2.75])
    r = metrics(reference_problem, er_mixing, state, p, c)
    assert r.grad_phi_sq == pytest.approx(0.0, abs=1e-20)
    assert r.grad_approx_sq == pytest.approx(0.0, abs=1e-20)
    assert r.inner_err_sq == pytest.approx(0.0, abs=1e-20)
    assert r.pen_inner_err_sq == pytest.approx(0.0, abs=1e-20)
    assert (r.cons_x_sq, r.cons_y_sq, r.cons_z_sq) == (0.0, 0.0, 0.0)


def test_approximation_error_at_consensus_fixed_point(reference_problem, er_mixing):
    lam = 20.0
    p = StepSizes(alpha=1e-4, beta=1e-3, gamma=1e-2, lam=lam, K=1)
    c = derive_constants(reference_problem.smoothness, lam)
    x = np.array([-1.0])
    y_lam = penalized_inner_solve(reference_problem, x, lam).y
    y_star = inner_solve(reference_problem, x).y
    r = metrics(reference_problem, er_mixing, consensus_state(reference_problem, x, y_lam, y_star), p, c)
    assert r.grad_approx_sq <= 2.0 * c.C_ou**2 / lam**2


def test_consensus_error():
    block = np.array([[1.0, 0.0], [3.0, 0.0]])
    assert consensus_error(block) == 1.0
    assert consensus_error(np.ones((4, 3))) == 0.0


def test_heterogeneity_of_reference_instance(reference_problem):
    het = heterogeneity(reference_problem, [np.array([0.25])])
    assert het.b_f_sq == pytest.approx(33.0)
    assert het.b_g_sq == pytest.approx(128.0)
    assert het.probe_count == 1
    more = heterogeneity(reference_problem, [np.array([2.0])], prior=het)
    assert more.b_f_sq >= het.b_f_sq
    assert more.probe_count == 2


def test_single_node_has_no_heterogeneity():
    problem = make_synthetic_quadratic(1, [2.0], [3.0], [1.0], [2.0], [5.0])
    het = heterogeneity(problem, [np.zeros(1), np.ones(1)])
    assert (het.b_f_sq, het.b_g_sq) == (0.0, 0.0)
    with pytest.raises(ValueError):
        heterogeneity(problem, [])


def test_centralized_reference_run(reference_problem):
    p = StepSizes(alpha=1e-3, beta=1e-3, gamma=1e-2, lam=20.0, K=50)
    c = derive_constants(reference_problem.smoothness, 20.0)
    log = run_centralized(reference_problem, p, c, 10)
    assert log.completed
    assert [r.k for r in log.records] == [0, 10, 20, 30, 40, 50]
    assert log.final_state.x.shape == (1, 1)
    assert all(r.cons_x_sq == 0.0 for r in log.records)

# ===== BOUND CHECKS =====

def auto_run(problem, mixing, K, log_interval=1, lam=20.0):
    c = derive_constants(problem.smoothness, lam)
    caps = stepsize_caps(c, problem.smoothness, mixing.rho, lam)
    p = auto_stepsizes(caps, lam, K, 0.9)
    log = run(problem, mixing, p, init_state(problem, mixing), log_interval, make_monitor(problem, mixing, p, c))
    return log, c, p


RECURRENCES = (
    "inner_error_recurrence",
    "penalized_error_recurrence",
    "consensus_x_recurrence",
    "consensus_y_recurrence",
    "consensus_z_recurrence",
)


def assert_rule_compliant_run_within_bounds(problem, mixing, K):
    log, c, p = auto_run(problem, mixing, K)
    het = heterogeneity(problem, log.trajectory)
    report = check_bounds(log, problem, c, p, mixing.rho, het)
    for name in ("inner_penalty_gap", "outer_penalty_gap", "gradient_approximation", "averaged_rate"):
        assert len(report.by_name(name)) == len(log.records)
        assert report.violations(name) == []
    for name in RECURRENCES:
        assert len(report.by_name(name)) == K
        assert report.violations(name) == []
    assert not any("recurrences" in notice for notice in report.notices)


def test_rule_compliant_run_satisfies_rate_and_approximation_bounds(reference_problem, er_mixing):
    assert_rule_compliant_run_within_bounds(reference_problem, er_mixing, 300)


@pytest.mark.slow
def test_long_rule_compliant_run_satisfies_every_bound(reference_problem, er_mixing):
    assert_rule_compliant_run_within_bounds(reference_problem, er_mixing, 2000)


def test_homogeneous_single_node_keeps_consensus_bounds():
    problem = make_synthetic_quadratic(1, [2.0], [3.0], [1.0], [2.0], [5.0])
    single = MixingMatrix.single_node()
    log, c, p = auto_run(problem, single, 30, lam=10.0)
    het = heterogeneity(problem, log.trajectory)
    report = check_bounds(log, problem, c, p, 0.0, het)
    for name in ("consensus_x_recurrence", "consensus_y_recurrence", "consensus_z_recurrence"):
        assert len(report.by_name(name)) == 30
        assert report.violations(name) == []


def test_sparse_logs_skip_recurrences_with_notice(reference_problem):
    mixing = metropolis_weights(ring(10))
    log, c, p = auto_run(reference_problem, mixing, 20, log_interval=5)
    report = check_bounds(log, reference_problem, c, p, mixing.rho, heterogeneity(reference_problem, log.trajectory))
    assert report.by_name("inner_error_recurrence") == []
    assert any("recurrences checked on 0 of 4" in notice for notice in report.notices)
    assert any("log_interval > 1" in notice for notice in report.notices)


def test_rate_check_skipped_without_outer_steps(reference_problem, er_mixing):
    p = StepSizes(alpha=0.0, beta=1e-4, gamma=1e-3, lam=20.0, K=3)
    c = derive_constants(reference_problem.smoothness, 20.0)
    log = run(reference_problem, er_mixing, p, init_state(reference_problem, er_mixing), 1, make_monitor(reference_problem, er_mixing, p, c))
    report = check_bounds(log, reference_problem, c, p, er_mixing.rho, heterogeneity(reference_problem, log.trajectory))
    assert report.by_name("averaged_rate") == []
    assert any("alpha = 0" in notice for notice in report.notices)
