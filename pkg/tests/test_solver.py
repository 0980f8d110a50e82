"""One-step arithmetic and run-loop behavior of the penalty solver."""

import numpy as np
import pytest
from pydantic import ValidationError

from distributed_bilevel.constants import auto_stepsizes, derive_constants, stepsize_caps
from distributed_bilevel.errors import ConfigurationError, DivergenceError
from distributed_bilevel.network import metropolis_weights, ring
from distributed_bilevel.problems import make_quadratic_saddle, make_synthetic_quadratic
from distributed_bilevel.solver import directions, init_state, run, step
from distributed_bilevel.state_network import MixingMatrix
from distributed_bilevel.state_solver import MetricsRecord, SolverState, StepSizes
from distributed_bilevel.verification import make_monitor


def toy_problem():
    # f = (y - 1)^2 / 2, g = (x + y)^2 / 2 on a single node
    return make_synthetic_quadratic(1, [1.0], [1.0], [1.0], [1.0], [0.0])


def cheap_monitor(state):
    return MetricsRecord(
        k=state.k,
        phi=0.0,
        grad_phi_sq=0.0,
        grad_approx_sq=0.0,
        inner_err_sq=0.0,
        pen_inner_err_sq=0.0,
        cons_x_sq=0.0,
        cons_y_sq=0.0,
        cons_z_sq=0.0,
        V=0.0,
        hx_bar_sq=1.0,
    )


def test_directions_at_origin():
    problem = toy_problem()
    state = init_state(problem, MixingMatrix.single_node())
    d = directions(problem, state, 2.0)
    assert d.h_x[0, 0] == 0.0
    assert d.h_y[0, 0] == -1.0
    assert d.h_z[0, 0] == 0.0


def test_one_step_hand_example():
    problem = toy_problem()
    state = init_state(problem, MixingMatrix.single_node())
    nxt = step(problem, MixingMatrix.single_node(), state, StepSizes(alpha=0.1, beta=0.1, gamma=0.1, lam=2.0, K=1))
    assert nxt.k == 1
    assert nxt.x[0, 0] == 0.0
    assert nxt.y[0, 0] == pytest.approx(0.1)
    assert nxt.z[0, 0] == 0.0


def test_zero_steps_only_mix(reference_problem, er_mixing):
    state = init_state(reference_problem, er_mixing, "random", seed=3)
    nxt = step(reference_problem, er_mixing, state, StepSizes(alpha=0.0, beta=0.0, gamma=0.0, lam=20.0, K=1))
    assert np.allclose(nxt.x, er_mixing.W @ state.x)
    assert np.allclose(nxt.y, er_mixing.W @ state.y)
    assert np.allclose(nxt.z, er_mixing.W @ state.z)


def test_mixing_preserves_means(reference_problem, er_mixing):
    state = init_state(reference_problem, er_mixing, "random", seed=4)
    nxt = step(reference_problem, er_mixing, state, StepSizes(alpha=0.0, beta=0.0, gamma=0.0, lam=20.0, K=1))
    for before, after in zip(state.means(), nxt.means()):
        assert after == pytest.approx(before)


def test_complete_graph_reaches_consensus_with_zero_steps(reference_problem, complete_mixing):
    state = init_state(reference_problem, complete_mixing, "random", seed=5)
    nxt = step(reference_problem, complete_mixing, state, StepSizes(alpha=0.0, beta=0.0, gamma=0.0, lam=20.0, K=1))
    for block in (nxt.x, nxt.y, nxt.z):
        assert np.ptp(block) == pytest.approx(0.0, abs=1e-12)


def test_run_records_schedule(reference_problem, er_mixing):
    p = StepSizes(alpha=1e-4, beta=1e-4, gamma=1e-3, lam=20.0, K=10)
    log = run(reference_problem, er_mixing, p, init_state(reference_problem, er_mixing), 4, cheap_monitor)
    assert [r.k for r in log.records] == [0, 4, 8, 10]
    assert len(log.trajectory) == 4
    assert log.completed
    assert log.final_state.k == 10


def test_zero_horizon_records_once(reference_problem, er_mixing):
    p = StepSizes(alpha=1e-4, beta=1e-4, gamma=1e-3, lam=20.0, K=0)
    log = run(reference_problem, er_mixing, p, init_state(reference_problem, er_mixing), 1, cheap_monitor)
    assert len(log.records) == 1


def test_run_is_hessian_free(reference_problem, er_mixing):
    p = StepSizes(alpha=1e-4, beta=1e-3, gamma=1e-2, lam=20.0, K=20)
    c = derive_constants(reference_problem.smoothness, 20.0)
    monitor = make_monitor(reference_problem, er_mixing, p, c)
    run(reference_problem, er_mixing, p, init_state(reference_problem, er_mixing), 1, monitor)
    assert reference_problem.second_order_calls == 0
    assert reference_problem.verification_second_order_calls > 0


def test_early_stop_on_tolerance(reference_problem, er_mixing):
    p = StepSizes(alpha=1e-4, beta=1e-4, gamma=1e-3, lam=20.0, K=100)
    log = run(reference_problem, er_mixing, p, init_state(reference_problem, er_mixing), 1, cheap_monitor, tol=2.0)
    assert [r.k for r in log.records] == [0]
    assert log.completed


def test_divergence_keeps_partial_log():
    problem = make_synthetic_quadratic(3, [1, 1, 1], [1, 2, 3], [1, 1, 1], [1, 1, 1], [0, 0, 0])
    mixing = metropolis_weights(ring(3))
    p = StepSizes(alpha=10.0, beta=10.0, gamma=10.0, lam=20.0, K=1000)
    with pytest.raises(DivergenceError) as info:
        run(problem, mixing, p, init_state(problem, mixing), 1, cheap_monitor)
    partial = info.value.partial_log
    assert partial is not None
    assert not partial.completed
    assert 1 <= len(partial.records) < 1000
    assert info.value.k > partial.records[-1].k


def test_init_modes(reference_problem, er_mixing):
    random = init_state(reference_problem, er_mixing, "random", seed=1)
    assert np.all(np.abs(random.x) <= 1.0)
    assert np.ptp(random.x) > 0.0
    shared = init_state(reference_problem, er_mixing, "consensus-random", seed=1)
    assert np.ptp(shared.x) == 0.0
    assert np.array_equal(init_state(reference_problem, er_mixing, "random", seed=1).y, random.y)
    with pytest.raises(ConfigurationError):
        init_state(reference_problem, er_mixing, "ones")
    with pytest.raises(ConfigurationError):
        init_state(reference_problem, MixingMatrix.single_node())


def test_state_blocks_are_immutable(reference_problem, er_mixing):
    state = init_state(reference_problem, er_mixing)
    with pytest.raises(ValidationError):
        state.k = 3
    assert isinstance(state, SolverState)


def test_minmax_at_unit_penalty_only_mixes_y():
    problem = make_quadratic_saddle([1, 1, 1, 1, 1], [1, 1, 1, 1, 1], [2, 2, 3, 3, 4], [1, 0, -1, 0, 1])
    mixing = metropolis_weights(ring(5))
    state = init_state(problem, mixing, "random", seed=7)
    assert np.all(directions(problem, state, 1.0).h_y == 0.0)
    nxt = step(problem, mixing, state, StepSizes(alpha=1e-2, beta=0.5, gamma=1e-2, lam=1.0, K=1))
    assert np.array_equal(nxt.y, mixing.mix(state.y))

    single = make_quadratic_saddle([1], [1], [2], [1])
    alone = MixingMatrix.single_node()
    start = init_state(single, alone, "random", seed=7)
    after = step(single, alone, start, StepSizes(alpha=1e-2, beta=0.5, gamma=1e-2, lam=1.0, K=1))
    assert np.array_equal(after.y, start.y)


def test_steps_are_bitwise_reproducible(reference_problem, er_mixing):
    p = StepSizes(alpha=1e-4, beta=1e-3, gamma=1e-2, lam=20.0, K=2)
    state = init_state(reference_problem, er_mixing, "random", seed=9)
    first = step(reference_problem, er_mixing, step(reference_problem, er_mixing, state, p), p)
    second = step(reference_problem, er_mixing, step(reference_problem, er_mixing, state, p), p)
    for a, b in ((first.x, second.x), (first.y, second.y), (first.z, second.z)):
        assert np.array_equal(a, b)


def test_complete_graph_keeps_identical_nodes_in_consensus(complete_mixing):
    # identical local functions, so every node takes the same step
    problem = make_synthetic_quadratic(10, [2.0] * 10, [3.0] * 10, [1.0] * 10, [2.0] * 10, [5.0] * 10)
    c = derive_constants(problem.smoothness, 10.0)
    p = auto_stepsizes(stepsize_caps(c, problem.smoothness, complete_mixing.rho, 10.0), 10.0, 50, 0.9)
    log = run(problem, complete_mixing, p, init_state(problem, complete_mixing, "consensus-random", seed=2), 1, make_monitor(problem, complete_mixing, p, c))
    assert len(log.records) == 51
    for record in log.records:
        assert max(record.cons_x_sq, record.cons_y_sq, record.cons_z_sq) <= 1e-20
