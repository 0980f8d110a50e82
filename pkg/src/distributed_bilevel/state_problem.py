"""Pydantic Schemas for Problem Definitions.

This defines the smoothness metadata every problem family carries and the
dataset container used by the logistic hyperparameter family.
"""

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

# ===== SMOOTHNESS METADATA =====

class SmoothnessInput(BaseModel):
    """Regularity constants of the local objectives.

    All moduli refer to a single node's functions; the analysis constants are
    derived from these values and the penalty parameter.
    """

    model_config = ConfigDict(frozen=True)

    mu_g: float = Field(gt=0, description="Strong convexity modulus of each g_i in y.")
    L_f1: float = Field(gt=0, description="Joint gradient Lipschitz constant of each f_i.")
    L_g1: float = Field(gt=0, description="Joint gradient Lipschitz constant of each g_i.")
    L_g2: float = Field(ge=0, description="Hessian Lipschitz constant of each g_i.")
    C_fy: float = Field(ge=0, description="Bound on the y-gradient of f_i along the inner solution map.")

    @model_validator(mode="after")
    def _modulus_below_smoothness(self) -> "SmoothnessInput":
        if self.mu_g > self.L_g1:
            raise ValueError(f"mu_g={self.mu_g} exceeds L_g1={self.L_g1}")
        return self

# ===== DATASETS =====

class Dataset(BaseModel):
    """Labelled samples with their node and train/validation assignment."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    features: np.ndarray = Field(description="Sample matrix, one row per sample.")
    labels: np.ndarray = Field(description="Labels in {-1, +1}.")
    node: np.ndarray = Field(description="Owning node of every sample (0-based).")
    is_val: np.ndarray = Field(description="True for validation samples, False for training samples.")

    @model_validator(mode="after")
    def _consistent_partition(self) -> "Dataset":
        count = self.features.shape[0]
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-d array")
        for name in ("labels", "node", "is_val"):
            if getattr(self, name).shape != (count,):
                raise ValueError(f"{name} must hold exactly one entry per sample")
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise ValueError("labels must lie in {-1, +1}")
        return self

    @property
    def n_features(self) -> int:
        """Feature dimension."""
        return int(self.features.shape[1])

    def subset(self, node: int, validation: bool) -> tuple[np.ndarray, np.ndarray]:
        """Return (features, labels) of one node's train or validation role."""
        mask = (self.node == node) & (self.is_val == validation)
        return self.features[mask], self.labels[mask]
