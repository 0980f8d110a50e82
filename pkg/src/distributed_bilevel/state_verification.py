"""Schemas for verification oracles and bound reports."""

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from rich.table import Table
from typing_extensions import NamedTuple

from distributed_bilevel.state_solver import OracleFlag

# ===== ORACLE RESULTS =====

class InnerSolution(NamedTuple):
    """Result of an inner or penalized inner solve."""

    y: np.ndarray
    residual: float
    iterations: int
    converged: bool
    closed_form: bool
    flags: OracleFlag


class Hypergradient(NamedTuple):
    """Hypergradient together with the inner solution it was computed at."""

    grad: np.ndarray
    inner: InnerSolution
    flags: OracleFlag


class HeterogeneityEstimate(BaseModel):
    """Running suprema of gradient heterogeneity along (x, y*(x))."""

    model_config = ConfigDict(frozen=True)

    b_f_sq: float = Field(default=0.0, ge=0)
    b_g_sq: float = Field(default=0.0, ge=0)
    probe_count: int = Field(default=0, ge=0)
    flags: OracleFlag = OracleFlag.NONE

# ===== BOUND REPORTS =====

# Relative and absolute slack absorbing oracle residuals
RELATIVE_SLACK = 1e-6
ABSOLUTE_SLACK = 1e-16


class BoundCheck(BaseModel):
    """One evaluated inequality lhs <= rhs."""

    model_config = ConfigDict(frozen=True)

    name: str
    k: int = Field(description="Iteration (or probe index) the check refers to.")
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        """rhs - lhs; negative values are violations before slack."""
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        """Whether the inequality holds within the slack."""
        return bool(self.lhs <= self.rhs * (1.0 + RELATIVE_SLACK) + ABSOLUTE_SLACK)


class CheckSummary(NamedTuple):
    """Aggregate of all checks sharing one name."""

    name: str
    count: int
    violations: int
    worst: BoundCheck


class BoundReport(BaseModel):
    """All evaluated checks plus notices about skipped ones."""

    checks: list[BoundCheck] = Field(default_factory=list)
    notices: list[str] = Field(default_factory=list)

    def names(self) -> list[str]:
        """Check names in first-appearance order."""
        return list(dict.fromkeys(c.name for c in self.checks))

    def by_name(self, name: str) -> list[BoundCheck]:
        """All checks with the given name."""
        return [c for c in self.checks if c.name == name]

    def violations(self, name: str | None = None) -> list[BoundCheck]:
        """Failed checks, optionally restricted to one name."""
        return [c for c in self.checks if not c.passed and (name is None or c.name == name)]

    @property
    def passed(self) -> bool:
        """True when no check failed."""
        return not self.violations()

    def summary(self) -> list[CheckSummary]:
        """Per-name counts and the smallest-margin instance."""
        rows = []
        for name in self.names():
            group = self.by_name(name)
            worst = min(group, key=lambda c: c.margin)
            rows.append(CheckSummary(name, len(group), sum(not c.passed for c in group), worst))
        return rows

    def to_table(self) -> Table:
        """Render the summary as a rich table."""
        table = Table(title="Bound checks")
        for column in ("check", "count", "violations", "worst k", "lhs", "rhs", "margin", "status"):
            table.add_column(column, justify="left" if column in ("check", "status") else "right")
        for row in self.summary():
            w = row.worst
            table.add_row(
                row.name,
                str(row.count),
                str(row.violations),
                str(w.k),
                f"{w.lhs:.6g}",
                f"{w.rhs:.6g}",
                f"{w.margin:.6g}",
                "pass" if row.violations == 0 else "FAIL",
            )
        return table

    def to_kv(self) -> str:
        """Machine-readable key/value lines, one per check."""
        lines = [f"# notice: {n}" for n in self.notices]
        for c in self.checks:
            lines.append(f"check={c.name} k={c.k} lhs={c.lhs!r} rhs={c.rhs!r} margin={c.margin!r} passed={str(c.passed).lower()}")
        return "\n".join(lines) + "\n"
