"""Communication graphs, Metropolis mixing weights and the spectral quantity rho.

Graphs are generated with networkx; spectral work uses a dense symmetric
eigen-solver since networks here have at most a few dozen nodes.
"""

import logging
from pathlib import Path

import networkx as nx
import numpy as np
from typing_extensions import Literal

from distributed_bilevel.errors import (
    ConfigurationError,
    GenerationError,
    MixingMatrixError,
    NotConnectedError,
)
from distributed_bilevel.state_network import Graph, MixingMatrix

logger = logging.getLogger(__name__)

NetworkModel = Literal["erdos-renyi", "ring", "complete"]

# ===== CONFIGURATION =====

# Tolerance for accepting externally supplied matrices as doubly stochastic
stochastic_tol = 1e-10

# ===== GRAPH GENERATION =====

def erdos_renyi(m: int, p: float, seed: int, max_attempts: int = 100) -> Graph:
    """Draw a connected Erdős–Rényi graph.

    Each attempt uses seed + attempt, so the result is a pure function of
    (m, p, seed).

    Args:
        m: Number of nodes, at least 2
        p: Edge probability in (0, 1]
        seed: Unsigned base seed
        max_attempts: Number of draws before giving up

    Returns:
        The first connected draw
    """
    if m < 2:
        raise ConfigurationError(f"Erdős–Rényi graphs need m >= 2, got {m}")
    if not 0.0 < p <= 1.0:
        raise ConfigurationError(f"edge probability must lie in (0, 1], got {p}")
    if seed < 0:
        raise ConfigurationError(f"seed must be unsigned, got {seed}")
    for attempt in range(max_attempts):
        candidate = nx.erdos_renyi_graph(m, p, seed=seed + attempt)
        if nx.is_connected(candidate):
            if attempt:
                logger.debug("Erdős–Rényi draw connected after %d retries", attempt)
            return Graph.from_networkx(candidate)
    raise GenerationError(f"no connected Erdős–Rényi graph (m={m}, p={p}) within {max_attempts} attempts")


def ring(m: int) -> Graph:
    """Cycle through all nodes (a single edge when m = 2)."""
    if m < 1:
        raise ConfigurationError(f"ring needs m >= 1, got {m}")
    return Graph.from_networkx(nx.cycle_graph(m)) if m > 2 else complete(m)


def complete(m: int) -> Graph:
    """All-pairs graph."""
    if m < 1:
        raise ConfigurationError(f"complete graph needs m >= 1, got {m}")
    return Graph.from_networkx(nx.complete_graph(m))


def build_graph(model: NetworkModel, m: int, p: float = 0.7, seed: int = 0, max_attempts: int = 100) -> Graph:
    """Dispatch on the configured network model."""
    if model == "erdos-renyi":
        return erdos_renyi(m, p, seed, max_attempts)
    if model == "ring":
        return ring(m)
    if model == "complete":
        return complete(m)
    raise ConfigurationError(f"unknown network model {model!r}", key="model")

# ===== MIXING WEIGHTS =====

def metropolis_weights(g: Graph) -> MixingMatrix:
    """Metropolis–Hastings weights W_ij = 1 / (1 + max(deg_i, deg_j)).

    Raises:
        NotConnectedError: if the graph is disconnected (rho would equal 1)
    """
    if not g.is_connected():
        raise NotConnectedError(f"graph with {g.m} nodes and {len(g.edges)} edges is not connected")
    degree = np.zeros(g.m, dtype=int)
    for i, j in g.edges:
        degree[i - 1] += 1
        degree[j - 1] += 1
    W = np.zeros((g.m, g.m))
    for i, j in g.edges:
        weight = 1.0 / (1.0 + max(degree[i - 1], degree[j - 1]))
        W[i - 1, j - 1] = W[j - 1, i - 1] = weight
    np.fill_diagonal(W, 1.0 - W.sum(axis=1))
    return MixingMatrix(W=W, rho=spectral_rho(W))


def spectral_rho(W: np.ndarray) -> float:
    """Square of the largest singular value of W - 11^T/m.

    Raises:
        MixingMatrixError: if W is not square, symmetric and doubly stochastic
    """
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise MixingMatrixError(f"mixing matrix must be square, got shape {W.shape}")
    if not np.allclose(W, W.T, rtol=0.0, atol=stochastic_tol):
        raise MixingMatrixError("mixing matrix is not symmetric")
    rows, cols = W.sum(axis=1), W.sum(axis=0)
    bad_rows = np.flatnonzero(np.abs(rows - 1.0) > stochastic_tol)
    bad_cols = np.flatnonzero(np.abs(cols - 1.0) > stochastic_tol)
    if bad_rows.size or bad_cols.size:
        detail = ", ".join(
            [f"row {i + 1} sums to {rows[i]!r}" for i in bad_rows] + [f"column {j + 1} sums to {cols[j]!r}" for j in bad_cols]
        )
        raise MixingMatrixError(f"mixing matrix is not doubly stochastic: {detail}", row_sums=rows, col_sums=cols)

    m = W.shape[0]
    eigenvalues = np.linalg.eigvalsh(W - np.full((m, m), 1.0 / m))
    rho = float(np.max(np.abs(eigenvalues)) ** 2)
    if rho >= 1.0 - 1e-12:
        logger.warning("rho = %.6g violates rho < 1; consensus will not contract", rho)
    return rho

# ===== SERIALIZATION =====

def write_edge_list(g: Graph, path: Path) -> Path:
    """Write '# m=<m>' followed by one 1-based 'i j' pair per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# m={g.m}"] + [f"{i} {j}" for i, j in g.edges]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_edge_list(path: Path) -> Graph:
    """Read an edge list; m defaults to the largest index without a header."""
    path = Path(path)
    m = None
    edges = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("m="):
                m = int(body[2:])
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ConfigurationError(f"{path}: expected 'i j', got {raw!r}", line=lineno)
        edges.append((int(parts[0]), int(parts[1])))
    if m is None:
        m = max((max(e) for e in edges), default=1)
    return Graph(m=m, edges=edges)


def write_mixing_matrix(mixing: MixingMatrix, path: Path) -> Path:
    """Export W as comma-separated rows."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, mixing.W, delimiter=",", fmt="%.17g")
    return path
