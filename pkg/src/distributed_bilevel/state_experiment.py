"""State Definitions and Pydantic Schemas for Experiments.

This defines the validated experiment configuration (one model per config
file section) and the graph states threaded through the experiment, check
and sweep workflows.
"""

import operator
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing_extensions import Annotated, Any, Literal, Optional, TypedDict

from distributed_bilevel.constants import D4Variant

# ===== CONFIGURATION SECTIONS =====

ProblemFamily = Literal["synthetic", "logistic", "minmax"]

# Keys whose values are comma-separated lists, per section
LIST_KEYS = {"problem": frozenset("abcdepqst")}

# Keys holding file paths, resolved against the config file's directory
PATH_KEYS = {"problem": frozenset({"dataset", "heldout"}), "run": frozenset({"output_dir"})}


class ProblemSection(BaseModel):
    """[problem]: family plus its coefficients or dataset."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    family: ProblemFamily
    a: Optional[list[float]] = Field(default=None, description="Synthetic outer slopes.")
    b: Optional[list[float]] = Field(default=None, description="Synthetic outer targets.")
    c: Optional[list[float]] = Field(default=None, description="Synthetic inner x-coefficients.")
    d: Optional[list[float]] = Field(default=None, description="Synthetic inner y-coefficients.")
    e: Optional[list[float]] = Field(default=None, description="Synthetic inner targets.")
    box_radius: float = Field(default=2.0, gt=0, description="x box used for C_fy bounds.")
    dataset: Optional[Path] = Field(default=None, description="Logistic training/validation file.")
    heldout: Optional[Path] = Field(default=None, description="Logistic held-out file for accuracy.")
    assignment: Literal["round-robin", "column"] = "round-robin"
    val_fraction: float = Field(default=0.5, gt=0, lt=1)
    eta_box: float = Field(default=1.0, gt=0, description="Assumed |eta| bound for logistic smoothness.")
    y_box: float = Field(default=5.0, gt=0, description="Assumed |y| bound for logistic smoothness.")
    p: Optional[list[float]] = Field(default=None, description="Saddle x-curvatures.")
    q: Optional[list[float]] = Field(default=None, description="Saddle couplings.")
    s: Optional[list[float]] = Field(default=None, description="Saddle concavities in y.")
    t: Optional[list[float]] = Field(default=None, description="Saddle linear terms in y.")

    @model_validator(mode="after")
    def _family_keys(self) -> "ProblemSection":
        synthetic = [self.a, self.b, self.c, self.d, self.e]
        if self.family == "synthetic" and any(v is not None for v in synthetic) and any(v is None for v in synthetic):
            raise ValueError("synthetic coefficients a, b, c, d, e must be given together (or all omitted)")
        if self.family == "logistic":
            if self.dataset is None:
                raise ValueError("logistic family requires 'dataset'")
            for name in ("dataset", "heldout"):
                path = getattr(self, name)
                if path is not None and not path.is_file():
                    raise ValueError(f"{name} file {path} does not exist")
        if self.family == "minmax" and any(v is None for v in (self.p, self.q, self.s, self.t)):
            raise ValueError("minmax family requires p, q, s, t")
        return self


class NetworkSection(BaseModel):
    """[network]: topology model and its parameters."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    model: Literal["erdos-renyi", "ring", "complete"] = "erdos-renyi"
    m: int = Field(gt=0, description="Number of nodes.")
    p: float = Field(default=0.7, gt=0, le=1, description="Erdős–Rényi edge probability.")
    seed: int = Field(default=0, ge=0, lt=2**64)
    max_attempts: int = Field(default=100, gt=0)


class StepSizeSection(BaseModel):
    """[stepsizes]: explicit step sizes or automatic caps."""

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    mode: Literal["explicit", "auto"] = "explicit"
    alpha: Optional[float] = Field(default=None, ge=0)
    beta: Optional[float] = Field(default=None, ge=0)
    gamma: Optional[float] = Field(default=None, ge=0)
    lam: float = Field(gt=0, alias="lambda")
    K: int = Field(ge=0)
    safety: float = Field(default=0.9, gt=0, lt=1, description="Fraction of the caps used in auto mode.")
    force: bool = Field(default=False, description="Run explicit step sizes above the caps.")

    @model_validator(mode="after")
    def _exactly_one_source(self) -> "StepSizeSection":
        given = [name for name in ("alpha", "beta", "gamma") if getattr(self, name) is not None]
        if self.mode == "explicit" and len(given) != 3:
            missing = sorted({"alpha", "beta", "gamma"} - set(given))
            raise ValueError(f"explicit step sizes need alpha, beta and gamma (missing {', '.join(missing)})")
        if self.mode == "auto" and given:
            raise ValueError(f"auto mode derives step sizes; remove {', '.join(given)}")
        return self


class RunSection(BaseModel):
    """[run]: initialization, logging cadence and output location."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    init: Literal["zeros", "random", "consensus-random"] = "zeros"
    init_seed: int = Field(default=0, ge=0, lt=2**64)
    log_interval: Optional[int] = Field(default=None, ge=1)
    output_dir: Optional[Path] = None
    reference: bool = Field(default=False, description="Also run the centralized reference.")


class MonitorSection(BaseModel):
    """[monitors]: bound checks and oracle tolerances."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    bound_checks: bool = False
    tol: Optional[float] = Field(default=None, gt=0)
    d4_variant: D4Variant = "printed"
    heterogeneity_probes: int = Field(default=20, ge=0)


class ExperimentConfig(BaseModel):
    """Fully validated experiment configuration."""

    model_config = ConfigDict(frozen=True)

    problem: ProblemSection
    network: NetworkSection
    stepsizes: StepSizeSection
    run: RunSection = Field(default_factory=RunSection)
    monitors: MonitorSection = Field(default_factory=MonitorSection)

    @property
    def tol(self) -> float:
        """Oracle tolerance, defaulting per family."""
        if self.monitors.tol is not None:
            return self.monitors.tol
        return 1e-8 if self.problem.family == "logistic" else 1e-10

    @property
    def log_interval(self) -> int:
        """Logging interval; 1 when bound checks need consecutive records."""
        if self.run.log_interval is not None:
            return self.run.log_interval
        if self.monitors.bound_checks:
            return 1
        return max(1, self.stepsizes.K // 1000)

# ===== GRAPH STATES =====

class ExperimentState(TypedDict, total=False):
    """State threaded through the experiment pipeline.

    Heavy objects (problem, network, logs) travel as plain values; the
    pipeline runs in-process and is never checkpointed.
    """

    config: ExperimentConfig
    output_dir: Path
    # Existing run directory re-read by the check pipeline
    run_dir: Path
    problem: Any
    graph: Any
    mixing: Any
    stepsizes: Any
    constants: Any
    caps: Any
    run_log: Any
    reference_log: Any
    heterogeneity: Any
    floors: Any
    bound_report: Any
    summary: dict[str, float]
    # Human-readable notes collected by every node
    notes: Annotated[list[str], operator.add]
    # Set when a node fails; the pipeline then writes what it has and stops
    error: Optional[str]
    exit_code: int
    artifacts: Annotated[list[str], operator.add]


class SweepResult(BaseModel):
    """One row of a sweep summary."""

    value: float
    status: Literal["ok", "diverged", "failed"] = "ok"
    final_grad_phi_sq: Optional[float] = None
    mean_grad_phi_sq: Optional[float] = None
    penalty_gap: Optional[float] = Field(default=None, description="||y*(0) - y*(0; lambda)|| probe.")
    C_sq: Optional[float] = None
    B_sq: Optional[float] = None
    message: str = ""
    output_dir: Optional[Path] = None
