"""Loopless penalty-based gradient solver over a mixing network.

Every iteration performs one simultaneous update of the three stacked
blocks, each direction evaluated at the incoming iterate:

    z' = W z - gamma * grad_y G(x, z)
    y' = W y - beta  * (grad_y F(x, y) + lam * grad_y G(x, y))
    x' = W x - alpha * (grad_x F(x, y) + lam * (grad_x G(x, y) - grad_x G(x, z)))

Only first-order oracles are used; second-order data is reserved for the
verification layer.
"""

import logging
from collections.abc import Callable

import numpy as np
from typing_extensions import Literal, Optional

from distributed_bilevel.errors import ConfigurationError, DivergenceError
from distributed_bilevel.problems import BilevelProblem
from distributed_bilevel.state_network import MixingMatrix
from distributed_bilevel.state_solver import (
    DirectionFields,
    MetricsRecord,
    RunLog,
    SolverState,
    StepSizes,
)

logger = logging.getLogger(__name__)

InitMode = Literal["zeros", "random", "consensus-random"]
Monitor = Callable[[SolverState], MetricsRecord]

# ===== CONFIGURATION =====

# Any iterate entry above this magnitude aborts the run
divergence_threshold = 1e12

# ===== INITIALIZATION =====

def init_state(problem: BilevelProblem, network: MixingMatrix, mode: InitMode = "zeros", seed: int = 0) -> SolverState:
    """Create the iterate at k = 0.

    Args:
        problem: Problem whose dimensions the blocks take
        network: Mixing network, must have problem.m nodes
        mode: "zeros", i.i.d. uniform in [-1, 1] ("random"), or one uniform
            draw replicated to every node ("consensus-random")
        seed: Seed for the random modes

    Returns:
        SolverState with k = 0
    """
    m, n, r = problem.m, problem.n, problem.r
    if network.m != m:
        raise ConfigurationError(f"network has {network.m} nodes but the problem has m={m}")
    if mode == "zeros":
        return SolverState(x=np.zeros((m, n)), y=np.zeros((m, r)), z=np.zeros((m, r)))
    rng = np.random.default_rng(seed)
    if mode == "random":
        return SolverState(
            x=rng.uniform(-1.0, 1.0, (m, n)),
            y=rng.uniform(-1.0, 1.0, (m, r)),
            z=rng.uniform(-1.0, 1.0, (m, r)),
        )
    if mode == "consensus-random":
        return SolverState(
            x=np.tile(rng.uniform(-1.0, 1.0, n), (m, 1)),
            y=np.tile(rng.uniform(-1.0, 1.0, r), (m, 1)),
            z=np.tile(rng.uniform(-1.0, 1.0, r), (m, 1)),
        )
    raise ConfigurationError(f"unknown init mode {mode!r}", key="init")

# ===== UPDATE =====

def directions(problem: BilevelProblem, state: SolverState, lam: float) -> DirectionFields:
    """Stacked directions at the current iterate; no Hessian oracle is touched."""
    fx, fy = problem.outer_grads(state.x, state.y)
    gx_y, gy_y = problem.inner_grads(state.x, state.y)
    gx_z, gy_z = problem.inner_grads(state.x, state.z)
    return DirectionFields(
        h_x=fx + lam * (gx_y - gx_z),
        h_y=fy + lam * gy_y,
        h_z=gy_z,
    )


def _guard(block: np.ndarray, name: str, k: int) -> None:
    peak = float(np.max(np.abs(block)))
    # NaN compares false, so this also catches non-finite entries
    if not peak <= divergence_threshold:
        raise DivergenceError(k=k, peak=peak, block=name)


def step(problem: BilevelProblem, network: MixingMatrix, state: SolverState, p: StepSizes) -> SolverState:
    """Advance one iteration; mixing acts on every coordinate column.

    Raises:
        DivergenceError: if any updated entry is non-finite or exceeds the guard
    """
    d = directions(problem, state, p.lam)
    z = network.mix(state.z) - p.gamma * d.h_z
    y = network.mix(state.y) - p.beta * d.h_y
    x = network.mix(state.x) - p.alpha * d.h_x
    k = state.k + 1
    for block, name in ((x, "x"), (y, "y"), (z, "z")):
        _guard(block, name, k)
    return SolverState(x=x, y=y, z=z, k=k)

# ===== FULL RUN =====

def run(
    problem: BilevelProblem,
    network: MixingMatrix,
    p: StepSizes,
    state: SolverState,
    log_interval: int,
    monitor: Monitor,
    tol: Optional[float] = None,
) -> RunLog:
    """Execute p.K steps from ``state``, recording diagnostics along the way.

    Records are taken at k = 0, at every multiple of ``log_interval`` and at
    the final iteration. Iteration stops early once ||mean h_x||^2 in a
    record drops to ``tol`` or below.

    Raises:
        DivergenceError: with ``partial_log`` holding every record taken so far
    """
    if log_interval < 1:
        raise ConfigurationError(f"log_interval must be >= 1, got {log_interval}", key="log_interval")
    log = RunLog()

    def record(current: SolverState) -> MetricsRecord:
        entry = monitor(current)
        log.records.append(entry)
        log.trajectory.append(current.x.mean(axis=0))
        logger.debug("k=%d grad_phi_sq=%.3e V=%.6g", entry.k, entry.grad_phi_sq, entry.V)
        return entry

    logger.info("Running K=%d steps on m=%d nodes (rho=%.4f)", p.K, problem.m, network.rho)
    entry = record(state)
    try:
        while state.k < p.K:
            if tol is not None and entry.hx_bar_sq <= tol:
                logger.info("Stopping at k=%d: mean outer direction below tolerance", state.k)
                break
            state = step(problem, network, state, p)
            if state.k % log_interval == 0 or state.k == p.K:
                entry = record(state)
    except DivergenceError as exc:
        log.final_state = state
        exc.partial_log = log
        logger.error("%s", exc)
        raise
    log.final_state = state
    log.completed = True
    return log
