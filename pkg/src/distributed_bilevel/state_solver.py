"""State Definitions and Pydantic Schemas for the Penalty Solver.

This defines the step-size bundle, the derived analysis constants, the
stacked per-node iterates, and the per-iteration diagnostics the run loop
collects.
"""

from enum import IntFlag

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from typing_extensions import Optional

# ===== PARAMETERS =====

class StepSizes(BaseModel):
    """Step sizes, penalty parameter and iteration budget."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    alpha: float = Field(ge=0, allow_inf_nan=False, description="Outer step size.")
    beta: float = Field(ge=0, allow_inf_nan=False, description="Inner (penalized) step size.")
    gamma: float = Field(ge=0, allow_inf_nan=False, description="Auxiliary step size.")
    lam: float = Field(gt=0, allow_inf_nan=False, alias="lambda", description="Penalty parameter.")
    K: int = Field(ge=0, description="Number of iterations.")


class AnalysisConstants(BaseModel):
    """Constants derived from SmoothnessInput and the penalty parameter."""

    model_config = ConfigDict(frozen=True)

    lam: float = Field(description="Penalty parameter the constants were derived for.")
    L_f1: float = Field(description="Echo of the outer smoothness constant.")
    L_g1: float = Field(description="Echo of the inner smoothness constant.")
    kappa: float = Field(description="Condition number max{L_f1, L_g1, C_fy} / mu_g.")
    L: float = Field(description="Smoothness of the hyper-objective gradient.")
    L_ystar: float = Field(description="Lipschitz constant of the inner solution map.")
    C_in: float = Field(description="Inner penalty gap constant.")
    C_ou: float = Field(description="Outer penalty gap constant.")
    mu_lambda: float = Field(description="Strong convexity of the penalized inner function.")
    L_lambda: float = Field(description="Smoothness of the penalized inner function.")
    L_ystar_lambda: float = Field(description="Lipschitz constant of the penalized solution map.")
    U_lambda_sq: float = Field(description="L_f1^2 + lambda^2 L_g1^2.")
    w_gamma: float
    w_beta: float
    u_beta: float
    p1: float
    p2: float
    p3: float
    penalty_threshold_met: bool = Field(description="Whether lambda exceeds 2 L_f1 / mu_g.")

# ===== ITERATES =====

class SolverState(BaseModel):
    """Stacked per-node iterates; row i belongs to node i."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    x: np.ndarray = Field(description="m x n outer iterates.")
    y: np.ndarray = Field(description="m x r penalized inner iterates.")
    z: np.ndarray = Field(description="m x r auxiliary inner iterates.")
    k: int = Field(default=0, ge=0, description="Iteration counter.")

    def means(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Network averages (x_bar, y_bar, z_bar)."""
        return self.x.mean(axis=0), self.y.mean(axis=0), self.z.mean(axis=0)


class DirectionFields(BaseModel):
    """Stacked update directions evaluated at one iterate."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    h_x: np.ndarray
    h_y: np.ndarray
    h_z: np.ndarray

# ===== DIAGNOSTICS =====

class OracleFlag(IntFlag):
    """Provenance and convergence flags of the verification solves."""

    NONE = 0
    INNER_NOT_CONVERGED = 1
    PENALIZED_NOT_CONVERGED = 2
    HYPERGRADIENT_FINITE_DIFF = 4
    EXACT_ARGMIN_MISMATCH = 8
    PENALTY_BELOW_THRESHOLD = 16
    HYPERGRADIENT_FAILED = 32


# Column order of the per-iteration log; the first ten are the stable schema
METRIC_COLUMNS = (
    "k",
    "phi",
    "grad_phi_sq",
    "grad_approx_sq",
    "inner_err_sq",
    "pen_inner_err_sq",
    "cons_x_sq",
    "cons_y_sq",
    "cons_z_sq",
    "V",
    "hx_bar_sq",
    "flags",
)


class MetricsRecord(BaseModel):
    """Diagnostics at one logged iteration."""

    model_config = ConfigDict(frozen=True)

    k: int
    phi: float = Field(description="Phi at the averaged outer iterate.")
    # NaN in the two hypergradient columns when HYPERGRADIENT_FAILED is set
    grad_phi_sq: float = Field(description="Squared hypergradient norm.")
    grad_approx_sq: float = Field(description="Squared distance between hypergradient and mean h_x.")
    inner_err_sq: float = Field(ge=0, description="||z_bar - y*(x_bar)||^2.")
    pen_inner_err_sq: float = Field(ge=0, description="||y_bar - y*(x_bar; lambda)||^2.")
    cons_x_sq: float = Field(ge=0)
    cons_y_sq: float = Field(ge=0)
    cons_z_sq: float = Field(ge=0)
    V: float = Field(description="Potential function value.")
    hx_bar_sq: float = Field(ge=0, description="Squared norm of the mean outer direction.")
    flags: OracleFlag = OracleFlag.NONE

    def row(self) -> list[float | int]:
        """Values in METRIC_COLUMNS order."""
        return [int(self.flags) if name == "flags" else getattr(self, name) for name in METRIC_COLUMNS]


class RunLog(BaseModel):
    """Ordered diagnostics plus the iterate the run ended on."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    records: list[MetricsRecord] = Field(default_factory=list)
    trajectory: list[np.ndarray] = Field(default_factory=list, description="x_bar at each logged k.")
    final_state: Optional[SolverState] = None
    completed: bool = False
