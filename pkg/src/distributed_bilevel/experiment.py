"""Experiment Orchestration.

This module wires the library into three workflows:

1. ``experiment_pipeline``: build the problem and network, plan step sizes,
   simulate, assess, optionally check bounds and write every artifact
2. ``check_pipeline``: re-run bound checks over an existing run directory
3. ``run_sweep``: fan experiment runs out concurrently over lambda, K or a
   network-density proxy for rho

Divergence is not an exception at this level: the simulate node routes
straight to artifact writing so the completed prefix is always on disk.
"""

import asyncio
import csv
import logging
from pathlib import Path

import numpy as np
from langgraph.graph import END, START, StateGraph
from langgraph.types import Command
from typing_extensions import Literal, Optional

from distributed_bilevel.config import parse_config, serialize_config, with_output_dir, with_stepsizes
from distributed_bilevel.constants import (
    auto_stepsizes,
    corollary1_scaling,
    corollary2_scaling,
    derive_constants,
    error_floors,
    exceeded_caps,
    stepsize_caps,
)
from distributed_bilevel.datasets import load_dataset, load_heldout
from distributed_bilevel.errors import ArtifactError, BilevelError, ConfigurationError, DivergenceError
from distributed_bilevel.network import build_graph, metropolis_weights, write_edge_list, write_mixing_matrix
from distributed_bilevel.problems import (
    REFERENCE_SYNTHETIC,
    BilevelProblem,
    LogisticHyperopt,
    estimate_logistic_smoothness,
    heldout_accuracy,
    make_logistic_hyperopt,
    make_quadratic_saddle,
    make_synthetic_quadratic,
)
from distributed_bilevel.solver import init_state, run
from distributed_bilevel.state_experiment import ExperimentConfig, ExperimentState, SweepResult
from distributed_bilevel.state_solver import METRIC_COLUMNS, MetricsRecord, OracleFlag, RunLog, StepSizes
from distributed_bilevel.templates import (
    LOG_SCHEMA,
    key_values,
    log_header_template,
    reference_header_template,
    run_header_template,
    state_template,
    sweep_columns,
    trajectory_header_template,
)
from distributed_bilevel.utils import default_output_dir, format_vector
from distributed_bilevel.verification import (
    check_bounds,
    heterogeneity,
    inner_solve,
    make_monitor,
    penalized_inner_solve,
    run_centralized,
)

logger = logging.getLogger(__name__)

# ===== CONFIGURATION =====

# Maximum number of experiment runs a sweep executes at once
max_concurrent_runs = 3

# Artifact file names inside a run directory
HEADER_FILE = "header.txt"
LOG_FILE = "log.csv"
TRAJECTORY_FILE = "trajectory.csv"
STATE_FILE = "state_final.txt"
CONFIG_FILE = "config.conf"
EDGES_FILE = "network.edges"
MIXING_FILE = "mixing.csv"
BOUNDS_FILE = "bounds.txt"
BOUNDS_KV_FILE = "bounds.kv"
REFERENCE_FILE = "reference.csv"
SWEEP_FILE = "sweep.csv"

# ===== BUILDERS =====

def build_problem_from_config(config: ExperimentConfig) -> BilevelProblem:
    """Instantiate the configured problem family on config.network.m nodes."""
    spec, m = config.problem, config.network.m
    if spec.family == "synthetic":
        coefficients = {name: getattr(spec, name) for name in "abcde"}
        if coefficients["a"] is None:
            coefficients = REFERENCE_SYNTHETIC
        return make_synthetic_quadratic(m, **coefficients, box_radius=spec.box_radius)
    if spec.family == "logistic":
        data = load_dataset(spec.dataset, m, spec.assignment, spec.val_fraction)
        held = load_heldout(spec.heldout) if spec.heldout is not None else None
        if held is not None and held.n_features != data.n_features:
            raise ConfigurationError(f"held-out data has {held.n_features} features, training data {data.n_features}", key="heldout")
        smoothness = estimate_logistic_smoothness(data, m, spec.eta_box, spec.y_box)
        return make_logistic_hyperopt(data, m, smoothness, heldout=held)
    if len(spec.p) != m:
        raise ConfigurationError(f"saddle coefficients have {len(spec.p)} entries but the network has m={m}", key="p")
    return make_quadratic_saddle(spec.p, spec.q, spec.s, spec.t, box_radius=spec.box_radius)


def plan(config: ExperimentConfig, problem: BilevelProblem, rho: float):
    """Derive constants, caps and the step sizes the run will use.

    Returns:
        (StepSizes, AnalysisConstants, StepSizeCaps, notes)

    Raises:
        ConfigurationError: when explicit step sizes exceed the caps without ``force``
    """
    section = config.stepsizes
    constants = derive_constants(problem.smoothness, section.lam)
    caps = stepsize_caps(constants, problem.smoothness, rho, section.lam)
    notes = []
    if not constants.penalty_threshold_met:
        notes.append(f"lambda={section.lam:g} does not exceed 2 L_f1 / mu_g")
    if section.mode == "auto":
        p = auto_stepsizes(caps, section.lam, section.K, section.safety)
        notes.append(f"step sizes set to {section.safety:g} x caps")
        return p, constants, caps, notes

    p = StepSizes(alpha=section.alpha, beta=section.beta, gamma=section.gamma, lam=section.lam, K=section.K)
    exceeded = exceeded_caps(p, caps)
    if exceeded and not section.force:
        raise ConfigurationError(
            f"step sizes {', '.join(exceeded)} exceed the convergence caps "
            f"(alpha<={caps.alpha_max:.3g}, beta<={caps.beta_max:.3g}, gamma<={caps.gamma_max:.3g}); set force = true to run anyway",
            key="force",
        )
    if exceeded:
        logger.warning("running with %s above the convergence caps (force = true)", ", ".join(exceeded))
        notes.append(f"forced past caps: {', '.join(exceeded)}")
    return p, constants, caps, notes


def probe_points(problem: BilevelProblem, config: ExperimentConfig) -> list[np.ndarray]:
    """Seeded uniform probes in the family's x box for heterogeneity estimation."""
    radius = config.problem.eta_box if config.problem.family == "logistic" else config.problem.box_radius
    rng = np.random.default_rng([config.run.init_seed, 2])
    return [rng.uniform(-radius, radius, problem.n) for _ in range(config.monitors.heterogeneity_probes)]


def penalty_gap_probe(problem: BilevelProblem, lam: float, tol: float) -> float:
    """||y*(0) - y*(0; lambda)|| at the origin."""
    x0 = np.zeros(problem.n)
    inner = inner_solve(problem, x0, tol)
    penalized = penalized_inner_solve(problem, x0, lam, tol, y0=inner.y)
    return float(np.linalg.norm(inner.y - penalized.y))

# ===== WORKFLOW NODES =====

def build_problem(state: ExperimentState) -> dict:
    """Instantiate the configured problem family."""
    config = state["config"]
    problem = build_problem_from_config(config)
    output_dir = config.run.output_dir or default_output_dir()
    return {
        "problem": problem,
        "output_dir": Path(output_dir),
        "notes": [f"{config.problem.family} problem with m={problem.m}, n={problem.n}, r={problem.r}"],
    }


def build_network(state: ExperimentState) -> dict:
    """Generate the graph and its Metropolis mixing matrix."""
    net = state["config"].network
    graph = build_graph(net.model, net.m, net.p, net.seed, net.max_attempts)
    mixing = metropolis_weights(graph)
    logger.info("%s network: %d edges, rho=%.6f", net.model, len(graph.edges), mixing.rho)
    return {"graph": graph, "mixing": mixing}


def plan_stepsizes(state: ExperimentState) -> dict:
    """Fix the step sizes, constants and caps for the run."""
    p, constants, caps, notes = plan(state["config"], state["problem"], state["mixing"].rho)
    return {"stepsizes": p, "constants": constants, "caps": caps, "notes": notes}


def simulate(state: ExperimentState) -> Command[Literal["assess", "write_artifacts"]]:
    """Execute the solver; divergence skips assessment and goes straight to the writer."""
    config, problem, mixing = state["config"], state["problem"], state["mixing"]
    p, constants = state["stepsizes"], state["constants"]
    monitor = make_monitor(problem, mixing, p, constants, config.tol, config.monitors.d4_variant)
    start = init_state(problem, mixing, config.run.init, config.run.init_seed)

    # Initialize variables for single return pattern
    update: dict = {}
    next_step = "assess"
    try:
        update["run_log"] = run(problem, mixing, p, start, config.log_interval, monitor)
    except DivergenceError as exc:
        update = {"run_log": exc.partial_log, "error": str(exc), "exit_code": 2, "notes": [f"diverged: {exc}"]}
        next_step = "write_artifacts"

    # The reference run never changes the distributed run's log or exit status
    if config.run.reference and next_step == "assess":
        try:
            update["reference_log"] = run_centralized(problem, p, constants, config.log_interval, config.tol, config.monitors.d4_variant)
        except DivergenceError as exc:
            logger.warning("centralized reference diverged: %s", exc)
            update["reference_log"] = exc.partial_log
            update["notes"] = [f"reference run diverged: {exc}"]

    return Command(goto=next_step, update=update)


def assess(state: ExperimentState) -> dict:
    """Measure heterogeneity, error floors and the end-of-run summary."""
    config, problem, p = state["config"], state["problem"], state["stepsizes"]
    log: RunLog = state["run_log"]
    het = heterogeneity(problem, list(log.trajectory) + probe_points(problem, config), config.tol)
    floors = error_floors(p, state["constants"], state["mixing"].rho, het.b_f_sq, het.b_g_sq)

    final = log.records[-1]
    x_bar, y_bar, z_bar = log.final_state.means()
    summary = {
        "k": float(final.k),
        "phi": final.phi,
        "final_grad_phi_sq": final.grad_phi_sq,
        "mean_grad_phi_sq": float(np.mean([r.grad_phi_sq for r in log.records])),
        "max_consensus_sq": max(final.cons_x_sq, final.cons_y_sq, final.cons_z_sq),
        "inner_err": float(np.sqrt(final.inner_err_sq)),
        "penalty_gap": penalty_gap_probe(problem, p.lam, config.tol),
        "b_f_sq": het.b_f_sq,
        "b_g_sq": het.b_g_sq,
        "C_sq": floors.C_sq,
        "B_sq": floors.B_sq,
    }
    optimum = problem.exact_outer_optimum
    if optimum is not None:
        summary["x_err"] = float(np.linalg.norm(x_bar - optimum[0]))
    if isinstance(problem, LogisticHyperopt) and problem.heldout is not None:
        summary["heldout_accuracy"] = heldout_accuracy(problem.heldout, y_bar)
    reference: Optional[RunLog] = state.get("reference_log")
    if reference is not None and reference.completed:
        reference_x = reference.final_state.x[0]
        summary["reference_gap"] = float(np.linalg.norm(x_bar - reference_x))

    notes = [f"final x_bar = {format_vector(x_bar)}"]
    if final.flags:
        notes.append(f"oracle flags at k={final.k}: {OracleFlag(final.flags)!r}")
    return {"heterogeneity": het, "floors": floors, "summary": summary, "notes": notes}


def route_after_assess(state: ExperimentState) -> Literal["check_bounds", "write_artifacts"]:
    """Run bound checks only when the config asks for them."""
    return "check_bounds" if state["config"].monitors.bound_checks else "write_artifacts"


def run_bound_checks(state: ExperimentState) -> dict:
    """Evaluate every bound along the run log."""
    config = state["config"]
    report = check_bounds(
        state["run_log"],
        state["problem"],
        state["constants"],
        state["stepsizes"],
        state["mixing"].rho,
        state["heterogeneity"],
        tuple(state["floors"]),
        config.tol,
    )
    if not report.passed:
        logger.warning("%d bound check(s) failed", len(report.violations()))
    return {"bound_report": report}

# ===== ARTIFACTS =====

def _number(value: float) -> str:
    return repr(float(value))


def format_log(log: RunLog, log_interval: int) -> str:
    """Log file text: '#' header lines then one CSV row per record."""
    header = log_header_template.format(
        schema=LOG_SCHEMA, columns=",".join(METRIC_COLUMNS), log_interval=log_interval, completed=str(log.completed).lower()
    )
    rows = [",".join(str(v) if isinstance(v, int) else _number(v) for v in record.row()) for record in log.records]
    return header + "".join(row + "\n" for row in rows)


def format_trajectory(log: RunLog) -> str:
    """Averaged outer iterate at every logged k."""
    rows = [",".join([str(r.k)] + [_number(v) for v in x]) for r, x in zip(log.records, log.trajectory)]
    return trajectory_header_template.format(schema=LOG_SCHEMA) + "".join(row + "\n" for row in rows)


def _matrix(block: np.ndarray) -> str:
    return "\n".join(",".join(_number(v) for v in row) for row in block)


def format_header(state: ExperimentState) -> str:
    """Run header: constants, caps, rho and the config echo."""
    config, problem, mixing = state["config"], state["problem"], state["mixing"]
    caps, p = state["caps"], state["stepsizes"]
    return run_header_template.format(
        schema=LOG_SCHEMA,
        family=config.problem.family,
        m=problem.m,
        n=problem.n,
        r=problem.r,
        network=config.network.model,
        rho=float(mixing.rho),
        edges=len(state["graph"].edges),
        smoothness=key_values(problem.smoothness.model_dump()),
        constants=key_values(state["constants"].model_dump()),
        caps=key_values(caps._asdict()),
        exceeded=",".join(exceeded_caps(p, caps)) or "none",
        stepsizes=key_values(p.model_dump()),
        log_interval=config.log_interval,
        tol=config.tol,
        notes="\n".join(f"# {note}" for note in state.get("notes", [])) or "# none",
        config="\n".join(f"# {line}" if line else "#" for line in serialize_config(config).splitlines()),
    )


def _write(path: Path, text: str) -> str:
    try:
        path.write_text(text)
    except OSError as exc:
        raise ArtifactError(path, exc) from exc
    return str(path)


def write_artifacts(state: ExperimentState) -> dict:
    """Write every artifact the run produced, including partial logs after divergence."""
    config = state["config"]
    out = state["output_dir"]
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ArtifactError(out, exc) from exc

    written = [
        _write(out / CONFIG_FILE, serialize_config(config)),
        _write(out / HEADER_FILE, format_header(state)),
        write_edge_list(state["graph"], out / EDGES_FILE).as_posix(),
        write_mixing_matrix(state["mixing"], out / MIXING_FILE).as_posix(),
    ]
    log: Optional[RunLog] = state.get("run_log")
    if log is not None:
        written.append(_write(out / LOG_FILE, format_log(log, config.log_interval)))
        written.append(_write(out / TRAJECTORY_FILE, format_trajectory(log)))
        if log.final_state is not None:
            s = log.final_state
            written.append(_write(out / STATE_FILE, state_template.format(k=s.k, x=_matrix(s.x), y=_matrix(s.y), z=_matrix(s.z))))
    reference: Optional[RunLog] = state.get("reference_log")
    if reference is not None:
        body = format_log(reference, config.log_interval).split("\n", 4)[-1]
        written.append(_write(out / REFERENCE_FILE, reference_header_template.format(schema=LOG_SCHEMA, columns=",".join(METRIC_COLUMNS)) + body))
    report = state.get("bound_report")
    if report is not None:
        rows = [
            f"{row.name:<28} count={row.count:<6} violations={row.violations:<4} worst_k={row.worst.k:<7} margin={row.worst.margin!r}"
            for row in report.summary()
        ]
        written.append(_write(out / BOUNDS_FILE, "\n".join([f"# notice: {n}" for n in report.notices] + rows) + "\n"))
        written.append(_write(out / BOUNDS_KV_FILE, report.to_kv()))

    logger.info("Wrote %d artifacts to %s", len(written), out)
    return {"artifacts": written, "exit_code": state.get("exit_code", 0)}

# ===== GRAPH CONSTRUCTION =====

# Build the experiment workflow
experiment_builder = StateGraph(ExperimentState)

# Add workflow nodes
experiment_builder.add_node("build_problem", build_problem)
experiment_builder.add_node("build_network", build_network)
experiment_builder.add_node("plan_stepsizes", plan_stepsizes)
experiment_builder.add_node("simulate", simulate)
experiment_builder.add_node("assess", assess)
experiment_builder.add_node("check_bounds", run_bound_checks)
experiment_builder.add_node("write_artifacts", write_artifacts)

# Add workflow edges
experiment_builder.add_edge(START, "build_problem")
experiment_builder.add_edge("build_problem", "build_network")
experiment_builder.add_edge("build_network", "plan_stepsizes")
experiment_builder.add_edge("plan_stepsizes", "simulate")
experiment_builder.add_conditional_edges(
    "assess",
    route_after_assess,
    {"check_bounds": "check_bounds", "write_artifacts": "write_artifacts"},
)
experiment_builder.add_edge("check_bounds", "write_artifacts")
experiment_builder.add_edge("write_artifacts", END)

# Compile the workflow
experiment_pipeline = experiment_builder.compile()

# ===== CHECK WORKFLOW =====

def read_log(path: Path) -> RunLog:
    """Parse a log file written by ``format_log`` (trajectory optional)."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ArtifactError(path, exc) from exc
    columns = list(METRIC_COLUMNS)
    completed = False
    records = []
    for lineno, line in enumerate(lines, start=1):
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("columns:"):
                columns = [c.strip() for c in body.split(":", 1)[1].split(",")]
            elif body.startswith("completed:"):
                completed = body.split(":", 1)[1].strip() == "true"
            continue
        if not line.strip():
            continue
        values = line.split(",")
        if len(values) != len(columns):
            raise ConfigurationError(f"{path}: expected {len(columns)} columns, got {len(values)}", line=lineno)
        fields = dict(zip(columns, values))
        records.append(
            MetricsRecord(
                **{name: float(v) for name, v in fields.items() if name not in ("k", "flags")},
                k=int(fields["k"]),
                flags=OracleFlag(int(fields.get("flags", 0))),
            )
        )
    return RunLog(records=records, completed=completed)


def read_trajectory(path: Path) -> list[np.ndarray]:
    """Averaged outer iterates of a trajectory file, in record order."""
    try:
        table = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ArtifactError(path, exc) from exc
    return [row[1:] for row in table]


def load_run(state: ExperimentState) -> dict:
    """Read the config, log and trajectory of an existing run directory."""
    run_dir = Path(state["run_dir"])
    config = parse_config(run_dir / CONFIG_FILE)
    log = read_log(run_dir / LOG_FILE)
    trajectory = read_trajectory(run_dir / TRAJECTORY_FILE)
    if len(trajectory) != len(log.records):
        raise ConfigurationError(f"{run_dir}: trajectory has {len(trajectory)} rows, log has {len(log.records)}")
    log.trajectory = trajectory
    config = with_output_dir(config, run_dir)
    return {"config": config, "run_log": log, "output_dir": run_dir}


def verify_run(state: ExperimentState) -> dict:
    """Rebuild the run's inputs and evaluate every bound on the stored log."""
    config = state["config"]
    problem = build_problem_from_config(config)
    net = config.network
    mixing = metropolis_weights(build_graph(net.model, net.m, net.p, net.seed, net.max_attempts))
    p, constants, _, _ = plan(config, problem, mixing.rho)
    log: RunLog = state["run_log"]
    het = heterogeneity(problem, list(log.trajectory) + probe_points(problem, config), config.tol)
    floors = error_floors(p, constants, mixing.rho, het.b_f_sq, het.b_g_sq)
    report = check_bounds(log, problem, constants, p, mixing.rho, het, tuple(floors), config.tol)
    return {"bound_report": report, "exit_code": 0 if report.passed else 3}


def write_report(state: ExperimentState) -> dict:
    """Overwrite the bound report files of the run directory."""
    out, report = state["output_dir"], state["bound_report"]
    rows = [
        f"{row.name:<28} count={row.count:<6} violations={row.violations:<4} worst_k={row.worst.k:<7} margin={row.worst.margin!r}"
        for row in report.summary()
    ]
    written = [
        _write(out / BOUNDS_FILE, "\n".join([f"# notice: {n}" for n in report.notices] + rows) + "\n"),
        _write(out / BOUNDS_KV_FILE, report.to_kv()),
    ]
    return {"artifacts": written}


check_builder = StateGraph(ExperimentState)
check_builder.add_node("load_run", load_run)
check_builder.add_node("verify_run", verify_run)
check_builder.add_node("write_report", write_report)
check_builder.add_edge(START, "load_run")
check_builder.add_edge("load_run", "verify_run")
check_builder.add_edge("verify_run", "write_report")
check_builder.add_edge("write_report", END)

check_pipeline = check_builder.compile()

# ===== SWEEPS =====

SweepAxis = Literal["lambda", "K", "rho-proxy"]
SweepScaling = Literal["fixed", "corollary1", "corollary2"]


def sweep_configs(
    config: ExperimentConfig,
    axis: SweepAxis,
    values: list[float],
    scaling: SweepScaling = "fixed",
    base_dir: Optional[Path] = None,
) -> list[ExperimentConfig]:
    """One config per sweep value, each writing to its own subdirectory.

    ``K`` sweeps with a scaling mode rescale the step sizes from the config's
    horizon (auto step sizes are resolved against the configured network
    first); ``rho-proxy`` sweeps the Erdős–Rényi edge probability.
    """
    if not values:
        raise ConfigurationError("sweep needs at least one value")
    if any(not v > 0 for v in values):
        raise ConfigurationError(f"sweep values must be positive, got {values}")
    if scaling != "fixed" and axis != "K":
        raise ConfigurationError(f"scaling {scaling!r} only applies to K sweeps", key="scaling")
    base_dir = Path(base_dir or config.run.output_dir or default_output_dir())

    base_p = None
    if scaling != "fixed":
        problem = build_problem_from_config(config)
        net = config.network
        rho = metropolis_weights(build_graph(net.model, net.m, net.p, net.seed, net.max_attempts)).rho
        base_p = plan(config, problem, rho)[0]

    configs = []
    for value in values:
        if axis == "lambda":
            swept = with_stepsizes(config, lam=float(value))
        elif axis == "K":
            K = int(value)
            if base_p is None:
                swept = with_stepsizes(config, K=K)
            else:
                rescale = corollary1_scaling if scaling == "corollary1" else corollary2_scaling
                q = rescale(base_p, max(config.stepsizes.K, 1), K)
                swept = with_stepsizes(config, mode="explicit", alpha=q.alpha, beta=q.beta, gamma=q.gamma, lam=q.lam, K=K, force=True)
        elif axis == "rho-proxy":
            if value > 1:
                raise ConfigurationError(f"rho-proxy values are edge probabilities in (0, 1], got {value}")
            swept = config.model_copy(update={"network": config.network.model_copy(update={"model": "erdos-renyi", "p": float(value)})})
        else:
            raise ConfigurationError(f"unknown sweep axis {axis!r}", key="axis")
        configs.append(with_output_dir(swept, base_dir / f"{axis}={value:g}"))
    return configs


async def _run_one(config: ExperimentConfig, value: float, semaphore: asyncio.Semaphore) -> SweepResult:
    async with semaphore:
        try:
            result = await experiment_pipeline.ainvoke({"config": config})
        except BilevelError as exc:
            logger.error("sweep value %g failed: %s", value, exc)
            return SweepResult(value=value, status="failed", message=str(exc), output_dir=config.run.output_dir)
    summary = result.get("summary", {})
    return SweepResult(
        value=value,
        status="diverged" if result.get("exit_code", 0) == 2 else "ok",
        final_grad_phi_sq=summary.get("final_grad_phi_sq"),
        mean_grad_phi_sq=summary.get("mean_grad_phi_sq"),
        penalty_gap=summary.get("penalty_gap"),
        C_sq=summary.get("C_sq"),
        B_sq=summary.get("B_sq"),
        message=result.get("error") or "",
        output_dir=config.run.output_dir,
    )


def write_sweep_summary(results: list[SweepResult], path: Path) -> Path:
    """CSV summary, one row per sweep value in sweep order."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(sweep_columns))
            writer.writeheader()
            for result in results:
                writer.writerow({key: getattr(result, key) if getattr(result, key) is not None else "" for key in sweep_columns})
    except OSError as exc:
        raise ArtifactError(path, exc) from exc
    return path


async def run_sweep(
    config: ExperimentConfig,
    axis: SweepAxis,
    values: list[float],
    scaling: SweepScaling = "fixed",
    base_dir: Optional[Path] = None,
) -> list[SweepResult]:
    """Run one experiment per value concurrently; failures are recorded, not raised.

    Returns:
        Results in the order of ``values``
    """
    configs = sweep_configs(config, axis, values, scaling, base_dir)
    semaphore = asyncio.Semaphore(max_concurrent_runs)
    coros = [_run_one(c, float(v), semaphore) for c, v in zip(configs, values)]

    # Wait for all runs to complete
    results = await asyncio.gather(*coros)

    root = Path(base_dir or config.run.output_dir or default_output_dir())
    write_sweep_summary(list(results), root / SWEEP_FILE)
    return list(results)
