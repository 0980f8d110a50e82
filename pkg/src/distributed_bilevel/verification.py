"""Verification Oracles and Bound Checks.

This module provides brute-force reference computations for everything the
solver approximates:

1. Inner and penalized inner solves by gradient descent (or closed form)
2. The implicit-differentiation hypergradient and a finite-difference twin
3. Per-iteration diagnostics including the potential function
4. Heterogeneity estimation and numerical checks of the error recurrences

Second-order oracles are only touched inside ``problem.verifying()`` blocks,
which keeps the solver's Hessian-free invocation counter clean.
"""

import logging
from collections.abc import Callable, Iterable, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from typing_extensions import Optional

from distributed_bilevel.constants import D4Variant, error_floors, penalty_threshold, potential_coefficients
from distributed_bilevel.errors import NumericalError
from distributed_bilevel.problems import AveragedProblem, BilevelProblem
from distributed_bilevel.solver import Monitor, directions, init_state, run
from distributed_bilevel.state_network import MixingMatrix
from distributed_bilevel.state_solver import (
    AnalysisConstants,
    MetricsRecord,
    OracleFlag,
    RunLog,
    SolverState,
    StepSizes,
)
from distributed_bilevel.state_verification import (
    BoundCheck,
    BoundReport,
    HeterogeneityEstimate,
    Hypergradient,
    InnerSolution,
)

logger = logging.getLogger(__name__)

# ===== CONFIGURATION =====

# Iteration cap of the gradient-descent solves
max_solver_iterations = 200_000

# Residual accepted from a closed-form argmin before falling back to descent
closed_form_residual = 1e-12

# ===== NUMERICAL HELPERS =====

def relative_error(estimate: np.ndarray, reference: np.ndarray, floor: float = 1e-3) -> float:
    """||estimate - reference|| / max(||reference||, floor)."""
    diff = np.linalg.norm(np.asarray(estimate) - np.asarray(reference))
    return float(diff / max(float(np.linalg.norm(reference)), floor))


def central_difference(fun: Callable[[np.ndarray], float], point: np.ndarray, h: float) -> np.ndarray:
    """Coordinatewise central differences of a scalar function."""
    point = np.asarray(point, dtype=float)
    grad = np.empty_like(point)
    for t in range(point.size):
        step = np.zeros_like(point)
        step[t] = h
        grad[t] = (fun(point + step) - fun(point - step)) / (2.0 * h)
    return grad


def _descend(
    grad: Callable[[np.ndarray], np.ndarray],
    y: np.ndarray,
    moduli: tuple[float, float],
    tol: float,
    max_iter: int,
) -> tuple[np.ndarray, float, int, bool]:
    mu, L = moduli
    g = grad(y)
    residual = float(np.linalg.norm(g))
    if mu + L <= 0.0:
        # flat objective: every point is a minimizer
        return y, residual, 0, residual <= tol
    step = 2.0 / (mu + L)
    iterations = 0
    while residual > tol and iterations < max_iter and np.isfinite(residual):
        y = y - step * g
        g = grad(y)
        residual = float(np.linalg.norm(g))
        iterations += 1
    return y, residual, iterations, residual <= tol

# ===== INNER SOLVES =====

def inner_solve(
    problem: BilevelProblem,
    x: np.ndarray,
    tol: float = 1e-10,
    y0: Optional[np.ndarray] = None,
    max_iter: int = max_solver_iterations,
) -> InnerSolution:
    """Minimize y -> mean g_i(x, y).

    A closed-form argmin is used when the family has one and its residual
    passes the cross-check; otherwise gradient descent with step 2/(mu + L)
    runs until ||mean grad_y g|| <= tol.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    x = np.asarray(x, dtype=float)
    flags = OracleFlag.NONE
    start = np.zeros(problem.r) if y0 is None else np.asarray(y0, dtype=float)

    exact = problem.exact_inner_argmin(x)
    if exact is not None:
        residual = float(np.linalg.norm(problem.mean_inner_grad_y(x, exact)))
        if residual <= max(tol, closed_form_residual):
            return InnerSolution(exact, residual, 0, True, True, flags)
        logger.warning("closed-form inner argmin has residual %.3e at x=%s; refining by descent", residual, x)
        flags |= OracleFlag.EXACT_ARGMIN_MISMATCH
        start = exact

    y, residual, iterations, converged = _descend(
        lambda v: problem.mean_inner_grad_y(x, v), start, problem.inner_moduli(x), tol, max_iter
    )
    if not converged:
        logger.warning("inner solve stopped after %d iterations with residual %.3e", iterations, residual)
        flags |= OracleFlag.INNER_NOT_CONVERGED
    return InnerSolution(y, residual, iterations, converged, False, flags)


def penalized_inner_solve(
    problem: BilevelProblem,
    x: np.ndarray,
    lam: float,
    tol: float = 1e-10,
    y0: Optional[np.ndarray] = None,
    max_iter: int = max_solver_iterations,
) -> InnerSolution:
    """Minimize y -> mean(f_i + lam * g_i) at x.

    Descent warm-starts from the inner solution unless ``y0`` is given, so a
    flat penalized objective (the min-max case at lam = 1) returns y*(x).
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    x = np.asarray(x, dtype=float)
    flags = OracleFlag.NONE
    if lam <= penalty_threshold(problem.smoothness):
        flags |= OracleFlag.PENALTY_BELOW_THRESHOLD

    def grad(v: np.ndarray) -> np.ndarray:
        return problem.mean_penalized_grad_y(x, v, lam)

    exact = problem.exact_penalized_argmin(x, lam)
    if exact is not None:
        residual = float(np.linalg.norm(grad(exact)))
        if residual <= max(tol, closed_form_residual):
            return InnerSolution(exact, residual, 0, True, True, flags)
        flags |= OracleFlag.EXACT_ARGMIN_MISMATCH
        start = exact
    elif y0 is not None:
        start = np.asarray(y0, dtype=float)
    else:
        seed = inner_solve(problem, x, tol)
        flags |= seed.flags & OracleFlag.INNER_NOT_CONVERGED
        start = seed.y

    y, residual, iterations, converged = _descend(grad, start, problem.penalized_moduli(x, lam), tol, max_iter)
    if not converged:
        logger.warning("penalized solve (lambda=%g) stopped after %d iterations with residual %.3e", lam, iterations, residual)
        flags |= OracleFlag.PENALIZED_NOT_CONVERGED
    return InnerSolution(y, residual, iterations, converged, False, flags)

# ===== HYPERGRADIENT =====

def hyper_objective(problem: BilevelProblem, x: np.ndarray, tol: float = 1e-10, y0: Optional[np.ndarray] = None) -> float:
    """Phi(x) = mean f_i(x, y*(x))."""
    return problem.mean_outer_value(x, inner_solve(problem, x, tol, y0=y0).y)


def _finite_diff(problem: BilevelProblem, x: np.ndarray, h: float, tol: float) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    base = inner_solve(problem, x, tol)
    converged = [base.converged]

    def phi(point: np.ndarray) -> float:
        sol = inner_solve(problem, point, tol, y0=base.y)
        converged.append(sol.converged)
        return problem.mean_outer_value(point, sol.y)

    return central_difference(phi, x, h), all(converged)


def finite_diff_hypergradient(problem: BilevelProblem, x: np.ndarray, h: float, tol: float = 1e-10) -> np.ndarray:
    """Central differences of Phi, each evaluation via an inner solve.

    Raises:
        NumericalError: if any inner solve fails to converge
    """
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    grad, converged = _finite_diff(problem, x, h, tol)
    if not converged:
        raise NumericalError(f"inner solve did not converge while differencing Phi at x={x}")
    return grad


def hypergradient(problem: BilevelProblem, x: np.ndarray, tol: float = 1e-10, inner: Optional[InnerSolution] = None) -> Hypergradient:
    """Implicit-differentiation hypergradient.

    Solves mean(d2/dy2 g) v = mean(grad_y f) by Cholesky factorization and
    returns mean(grad_x f) - mean(d2/dxdy g) v at (x, y*(x)). Families without
    second-order data fall back to finite differences and set a flag.

    Raises:
        NumericalError: if the averaged inner Hessian is not positive definite
    """
    x = np.asarray(x, dtype=float)
    inner = inner if inner is not None else inner_solve(problem, x, tol)
    flags = inner.flags
    if not problem.has_second_order:
        grad, converged = _finite_diff(problem, x, 1e-6 * (1.0 + float(np.linalg.norm(x))), tol)
        flags |= OracleFlag.HYPERGRADIENT_FINITE_DIFF
        if not converged:
            flags |= OracleFlag.INNER_NOT_CONVERGED
        return Hypergradient(grad, inner, flags)

    with problem.verifying():
        hxy, hyy = problem.mean_second_order(x, inner.y)
    fx, fy = problem.mean_outer_grad(x, inner.y)
    try:
        factor = cho_factor(hyy)
    except LinAlgError as exc:
        raise NumericalError(f"inner Hessian is not positive definite at x={x}") from exc
    v = cho_solve(factor, fy)
    return Hypergradient(fx - hxy @ v, inner, flags)


def penalty_gradient(problem: BilevelProblem, x: np.ndarray, lam: float, inner: InnerSolution, penalized: InnerSolution) -> np.ndarray:
    """Gradient of the penalty value function p*(x; lam) from two inner solves.

    grad_x f(x, y_lam) + lam * (grad_x g(x, y_lam) - grad_x g(x, y*)).
    """
    fx, _ = problem.mean_outer_grad(x, penalized.y)
    gx_lam, _ = problem.mean_inner_grad(x, penalized.y)
    gx_star, _ = problem.mean_inner_grad(x, inner.y)
    return fx + lam * (gx_lam - gx_star)

# ===== DIAGNOSTICS =====

def consensus_error(block: np.ndarray) -> float:
    """(1/m) ||block - 1 (x) mean||^2."""
    return float(np.sum((block - block.mean(axis=0)) ** 2) / block.shape[0])


def metrics(
    problem: BilevelProblem,
    network: MixingMatrix,
    state: SolverState,
    p: StepSizes,
    c: AnalysisConstants,
    tol: float = 1e-10,
    d4_variant: D4Variant = "printed",
) -> MetricsRecord:
    """Diagnostics at one iterate; oracle failures become flags, never errors."""
    x_bar, y_bar, z_bar = state.means()
    inner = inner_solve(problem, x_bar, tol)
    penalized = penalized_inner_solve(problem, x_bar, p.lam, tol, y0=inner.y)
    flags = inner.flags | penalized.flags
    try:
        hyper = hypergradient(problem, x_bar, tol, inner=inner)
        grad_phi = hyper.grad
        flags |= hyper.flags
    except NumericalError as exc:
        logger.warning("hypergradient unavailable at k=%d: %s", state.k, exc)
        grad_phi = np.full(problem.n, np.nan)
        flags |= OracleFlag.HYPERGRADIENT_FAILED

    h_x_bar = directions(problem, state, p.lam).h_x.mean(axis=0)
    inner_err = float(np.sum((z_bar - inner.y) ** 2))
    pen_err = float(np.sum((y_bar - penalized.y) ** 2))
    cons = [consensus_error(block) for block in (state.x, state.y, state.z)]
    phi = problem.mean_outer_value(x_bar, inner.y)
    d = potential_coefficients(p, c, network.rho, d4_variant)
    V = d.d0 * phi + d.d1 * pen_err + d.d2 * inner_err + d.d3 * cons[0] + d.d4 * cons[1] + d.d5 * cons[2]

    return MetricsRecord(
        k=state.k,
        phi=phi,
        grad_phi_sq=float(np.sum(grad_phi**2)),
        grad_approx_sq=float(np.sum((grad_phi - h_x_bar) ** 2)),
        inner_err_sq=inner_err,
        pen_inner_err_sq=pen_err,
        cons_x_sq=cons[0],
        cons_y_sq=cons[1],
        cons_z_sq=cons[2],
        V=V,
        hx_bar_sq=float(np.sum(h_x_bar**2)),
        flags=flags,
    )


def make_monitor(
    problem: BilevelProblem,
    network: MixingMatrix,
    p: StepSizes,
    c: AnalysisConstants,
    tol: float = 1e-10,
    d4_variant: D4Variant = "printed",
) -> Monitor:
    """Bind ``metrics`` to one run's fixed inputs for the solver's run loop."""

    def monitor(state: SolverState) -> MetricsRecord:
        return metrics(problem, network, state, p, c, tol, d4_variant)

    return monitor


def run_centralized(
    problem: BilevelProblem,
    p: StepSizes,
    c: AnalysisConstants,
    log_interval: int,
    tol: float = 1e-10,
    d4_variant: D4Variant = "printed",
) -> RunLog:
    """Reference run of the same update on network-averaged oracles (W = [1])."""
    averaged = AveragedProblem(problem)
    single = MixingMatrix.single_node()
    monitor = make_monitor(averaged, single, p, c, tol, d4_variant)
    return run(averaged, single, p, init_state(averaged, single, "zeros"), log_interval, monitor)


def heterogeneity(
    problem: BilevelProblem,
    x_samples: Iterable[np.ndarray],
    tol: float = 1e-10,
    prior: Optional[HeterogeneityEstimate] = None,
) -> HeterogeneityEstimate:
    """Running suprema of (1/m) sum_i ||grad f_i - grad f||^2 at (x, y*(x)).

    Both partial blocks contribute; likewise for g.
    """
    b_f_sq = prior.b_f_sq if prior else 0.0
    b_g_sq = prior.b_g_sq if prior else 0.0
    count = prior.probe_count if prior else 0
    flags = prior.flags if prior else OracleFlag.NONE
    samples = [np.asarray(x, dtype=float) for x in x_samples]
    if not samples and prior is None:
        raise ValueError("heterogeneity needs at least one sample point")

    for x in samples:
        sol = inner_solve(problem, x, tol)
        flags |= sol.flags
        X, Y = np.tile(x, (problem.m, 1)), np.tile(sol.y, (problem.m, 1))
        for grads, which in ((problem.outer_grads(X, Y), "f"), (problem.inner_grads(X, Y), "g")):
            spread = sum(float(np.sum((G - G.mean(axis=0)) ** 2)) for G in grads) / problem.m
            if which == "f":
                b_f_sq = max(b_f_sq, spread)
            else:
                b_g_sq = max(b_g_sq, spread)
        count += 1
    return HeterogeneityEstimate(b_f_sq=b_f_sq, b_g_sq=b_g_sq, probe_count=count, flags=flags)

# ===== BOUND CHECKS =====

def penalty_gap_checks(
    problem: BilevelProblem,
    c: AnalysisConstants,
    xs: Sequence[np.ndarray],
    tol: float = 1e-10,
    ks: Optional[Sequence[int]] = None,
) -> list[BoundCheck]:
    """Inner gap ||y* - y*_lam||^2 <= C_in^2/lam^2 and outer gap <= C_ou^2/lam^2 at each x."""
    lam = c.lam
    ks = list(range(len(xs))) if ks is None else list(ks)
    checks = []
    for k, x in zip(ks, xs):
        inner = inner_solve(problem, x, tol)
        penalized = penalized_inner_solve(problem, x, lam, tol, y0=inner.y)
        checks.append(BoundCheck(name="inner_penalty_gap", k=k, lhs=float(np.sum((inner.y - penalized.y) ** 2)), rhs=c.C_in**2 / lam**2))
        try:
            grad_phi = hypergradient(problem, x, tol, inner=inner).grad
        except NumericalError as exc:
            logger.warning("outer penalty gap skipped at k=%d: %s", k, exc)
            continue
        grad_p = penalty_gradient(problem, x, lam, inner, penalized)
        checks.append(BoundCheck(name="outer_penalty_gap", k=k, lhs=float(np.sum((grad_phi - grad_p) ** 2)), rhs=c.C_ou**2 / lam**2))
    return checks


def _approximation_rhs(r: MetricsRecord, c: AnalysisConstants) -> float:
    U2, lgl = c.U_lambda_sq, c.L_g1**2 * c.lam**2
    return (
        2.0 * c.C_ou**2 / c.lam**2
        + 12.0 * U2 * r.pen_inner_err_sq
        + 12.0 * lgl * r.inner_err_sq
        + 12.0 * U2 * r.cons_x_sq
        + 12.0 * U2 * r.cons_y_sq
        + 12.0 * lgl * r.cons_z_sq
    )


def _ratio(numerator: float, denominator: float) -> float:
    if numerator == 0.0:
        return 0.0
    return numerator / denominator if denominator else np.inf


def _recurrence_checks(
    prev: MetricsRecord,
    nxt: MetricsRecord,
    c: AnalysisConstants,
    p: StepSizes,
    rho: float,
    het: HeterogeneityEstimate,
) -> list[BoundCheck]:
    alpha, beta, gamma, lam = p.alpha, p.beta, p.gamma, p.lam
    gap = 1.0 - rho
    U2, Lg2, Cin2 = c.U_lambda_sq, c.L_g1**2, c.C_in**2
    cx, cy, cz = prev.cons_x_sq, prev.cons_y_sq, prev.cons_z_sq
    e_in, e_pen, hx = prev.inner_err_sq, prev.pen_inner_err_sq, prev.hx_bar_sq
    contraction = 1.0 - gap / 2.0
    k = nxt.k

    inner_rhs = (
        (1.0 - 2.0 * c.w_gamma * gamma) * e_in
        + 4.0 * Lg2 / c.w_gamma * gamma * (cx + cz)
        + _ratio(2.0 * c.L_ystar**2 * alpha**2 * hx, gamma * c.w_gamma)
    )
    penalized_rhs = (
        (1.0 - 2.0 * c.w_beta * beta) * e_pen
        + 8.0 * c.L_lambda / c.w_beta * beta * (cx + cy)
        + _ratio(2.0 * c.L_ystar_lambda**2 * alpha**2 * hx, beta * c.w_beta)
    )
    cons_x_rhs = (
        contraction * cx
        + 108.0 * alpha**2 * U2 / gap * (cy + cx)
        + 108.0 * alpha**2 * lam**2 * Lg2 / gap * cz
        + 108.0 * alpha**2 * U2 / gap * e_pen
        + 108.0 * alpha**2 * Cin2 * U2 / (gap * lam**2)
        + 108.0 * alpha**2 * lam**2 * Lg2 / gap * e_in
        + 6.0 * alpha**2 * het.b_f_sq / gap
    )
    cons_y_rhs = (
        contraction * cy
        + 72.0 * beta**2 * U2 / gap * (cx + cy)
        + 72.0 * beta**2 * U2 / gap * e_pen
        + 72.0 * beta**2 * Cin2 * U2 / (gap * lam**2)
        + 12.0 * beta**2 * (het.b_f_sq + lam**2 * het.b_g_sq) / gap
    )
    cons_z_rhs = (
        contraction * cz
        + 24.0 * Lg2 * gamma**2 / gap * (cx + cz)
        + 24.0 * Lg2 * gamma**2 / gap * e_in
        + 6.0 * gamma**2 * het.b_g_sq / gap
    )
    return [
        BoundCheck(name="inner_error_recurrence", k=k, lhs=nxt.inner_err_sq, rhs=inner_rhs),
        BoundCheck(name="penalized_error_recurrence", k=k, lhs=nxt.pen_inner_err_sq, rhs=penalized_rhs),
        BoundCheck(name="consensus_x_recurrence", k=k, lhs=nxt.cons_x_sq, rhs=cons_x_rhs),
        BoundCheck(name="consensus_y_recurrence", k=k, lhs=nxt.cons_y_sq, rhs=cons_y_rhs),
        BoundCheck(name="consensus_z_recurrence", k=k, lhs=nxt.cons_z_sq, rhs=cons_z_rhs),
    ]


def check_bounds(
    log: RunLog,
    problem: BilevelProblem,
    c: AnalysisConstants,
    p: StepSizes,
    rho: float,
    het: HeterogeneityEstimate,
    floors: Optional[tuple[float, float]] = None,
    tol: float = 1e-10,
) -> BoundReport:
    """Evaluate every bound along a run log.

    Penalty gaps and the pointwise approximation bound are checked at every
    record. The one-step recurrences need consecutive iterations and are
    skipped with a notice otherwise. The averaged-rate inequality is checked
    at every logged prefix; ``floors`` is (C^2, B^2) and defaults to the
    floors implied by ``het``.
    """
    report = BoundReport()
    records = log.records
    if not records:
        report.notices.append("empty run log; nothing to check")
        return report
    if not c.penalty_threshold_met:
        report.notices.append(f"lambda={c.lam:g} does not exceed 2 L_f1 / mu_g; penalty gap bounds are reported but not implied")

    report.checks.extend(penalty_gap_checks(problem, c, log.trajectory, tol, ks=[r.k for r in records]))
    failed = [r.k for r in records if not np.isfinite(r.grad_phi_sq)]
    if failed:
        report.notices.append(f"hypergradient failed at {len(failed)} record(s), first at k={failed[0]}; those records are not checked")
    for r in records:
        if np.isfinite(r.grad_approx_sq):
            report.checks.append(BoundCheck(name="gradient_approximation", k=r.k, lhs=r.grad_approx_sq, rhs=_approximation_rhs(r, c)))

    consecutive = 0
    for prev, nxt in zip(records, records[1:]):
        if nxt.k == prev.k + 1:
            report.checks.extend(_recurrence_checks(prev, nxt, c, p, rho, het))
            consecutive += 1
    if consecutive < len(records) - 1:
        report.notices.append(
            f"one-step recurrences checked on {consecutive} of {len(records) - 1} record pairs; use log_interval = 1 for full coverage"
        )

    if floors is None:
        f = error_floors(p, c, rho, het.b_f_sq, het.b_g_sq)
        floors = (f.C_sq, f.B_sq)
    C_sq, B_sq = floors
    if records[-1].k + 1 != len(records):
        report.notices.append("rate inequality averages logged records only (log_interval > 1)")
    if p.alpha <= 0:
        report.notices.append("alpha = 0; rate inequality skipped")
        return report
    running = 0.0
    V0 = records[0].V
    for j, r in enumerate(records):
        if not np.isfinite(r.grad_phi_sq):
            # every later prefix average would contain the missing value
            break
        running += r.grad_phi_sq
        horizon = r.k + 1
        rhs = (V0 - r.V) / (p.alpha * horizon) + C_sq + B_sq
        report.checks.append(BoundCheck(name="averaged_rate", k=horizon, lhs=running / (j + 1), rhs=rhs))
    return report
