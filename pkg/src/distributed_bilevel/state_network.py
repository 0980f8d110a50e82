"""Pydantic Schemas for Communication Networks.

Graphs store 1-based undirected edges; mixing matrices carry the doubly
stochastic weights together with their spectral quantity rho.
"""

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# ===== GRAPHS =====

class Graph(BaseModel):
    """Undirected communication graph without stored self-loops."""

    model_config = ConfigDict(frozen=True)

    m: int = Field(gt=0, description="Number of nodes.")
    edges: tuple[tuple[int, int], ...] = Field(
        default=(),
        description="Sorted unordered node pairs (i, j) with 1 <= i < j <= m.",
    )

    @field_validator("edges", mode="before")
    @classmethod
    def _normalize(cls, value):
        return tuple(sorted((min(i, j), max(i, j)) for i, j in value))

    @model_validator(mode="after")
    def _valid_edges(self) -> "Graph":
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (1 <= i <= self.m and 1 <= j <= self.m):
                raise ValueError(f"edge ({i}, {j}) outside nodes 1..{self.m}")
        if len(set(self.edges)) != len(self.edges):
            raise ValueError("duplicate edges")
        return self

    @classmethod
    def from_networkx(cls, graph: nx.Graph) -> "Graph":
        """Convert a 0-based networkx graph."""
        return cls(m=graph.number_of_nodes(), edges=[(u + 1, v + 1) for u, v in graph.edges()])

    def to_networkx(self) -> nx.Graph:
        """Return a 0-based networkx view."""
        graph = nx.Graph()
        graph.add_nodes_from(range(self.m))
        graph.add_edges_from((i - 1, j - 1) for i, j in self.edges)
        return graph

    def is_connected(self) -> bool:
        """Whether every node reaches every other node."""
        return nx.is_connected(self.to_networkx())

# ===== MIXING MATRICES =====

class MixingMatrix(BaseModel):
    """Symmetric doubly stochastic W and rho = ||W - 11^T/m||^2."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    W: np.ndarray = Field(description="m x m mixing weights.")
    rho: float = Field(ge=0.0, lt=1.0, description="Squared spectral norm of W minus the averaging matrix.")

    @property
    def m(self) -> int:
        """Number of nodes."""
        return int(self.W.shape[0])

    @classmethod
    def single_node(cls) -> "MixingMatrix":
        """Trivial network used by the centralized reference run."""
        return cls(W=np.ones((1, 1)), rho=0.0)

    def mix(self, block: np.ndarray) -> np.ndarray:
        """Apply one synchronous averaging round to every coordinate column."""
        return self.W @ block
