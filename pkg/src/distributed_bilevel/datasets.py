"""Dataset ingestion and the synthetic two-cluster generator.

Files are comma-separated, one sample per line: the label first, then the
features, then (optionally) a 1-based node assignment column.
"""

import logging
from pathlib import Path

import numpy as np
from typing_extensions import Literal

from distributed_bilevel.errors import ConfigurationError, DataError
from distributed_bilevel.state_problem import Dataset

logger = logging.getLogger(__name__)

Assignment = Literal["round-robin", "column"]

# ===== INGESTION =====

def _remap_labels(raw: np.ndarray, path: Path) -> np.ndarray:
    values = set(np.unique(raw).tolist())
    if values <= {0.0, 1.0}:
        return np.where(raw > 0.5, 1.0, -1.0)
    if values <= {-1.0, 1.0}:
        return raw.astype(float)
    raise DataError(f"{path}: labels must be in {{0, 1}} or {{-1, +1}}, found {sorted(values)}")


def load_dataset(path: Path, m: int, assignment: Assignment = "round-robin", val_fraction: float = 0.5) -> Dataset:
    """Read and partition a labelled dataset.

    Within each node the last ``round(val_fraction * count)`` samples form the
    validation role and the rest the training role.

    Args:
        path: Delimiter-separated text file
        m: Number of nodes
        assignment: Round-robin by sample order, or the trailing node column
        val_fraction: Share of each node's samples used for validation

    Returns:
        Partitioned Dataset with labels in {-1, +1}
    """
    path = Path(path)
    try:
        table = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from exc
    except ValueError as exc:
        raise DataError(f"{path}: malformed rows ({exc})") from exc
    if table.shape[0] == 0:
        raise DataError(f"{path}: no samples")

    labels = _remap_labels(table[:, 0], path)
    if assignment == "column":
        if table.shape[1] < 3:
            raise DataError(f"{path}: column assignment needs a label, features and a node column")
        features = table[:, 1:-1]
        node = table[:, -1].astype(int) - 1
        if np.any((node < 0) | (node >= m)):
            raise DataError(f"{path}: node column must hold values in 1..{m}")
    else:
        features = table[:, 1:]
        node = np.arange(table.shape[0]) % m
    if features.shape[1] == 0:
        raise DataError(f"{path}: samples carry no features")

    is_val = np.zeros(table.shape[0], dtype=bool)
    for i in range(m):
        members = np.flatnonzero(node == i)
        n_val = int(round(val_fraction * members.size))
        if members.size and (n_val == 0 or n_val == members.size):
            raise ConfigurationError(f"node {i + 1} gets {members.size} samples; val_fraction={val_fraction} leaves a role empty")
        is_val[members[members.size - n_val:]] = True

    logger.info("Loaded %d samples with %d features from %s", features.shape[0], features.shape[1], path)
    return Dataset(features=features, labels=labels, node=node, is_val=is_val)

# ===== GENERATION =====

def generate_dataset(
    n_features: int,
    samples_per_node: int,
    m: int,
    separation: float,
    seed: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Draw two Gaussian clusters centred at +/- separation * u.

    Labels alternate within each node, so every node is balanced up to one
    sample.

    Returns:
        (labels, features, node, direction u) with 0-based nodes
    """
    if min(n_features, samples_per_node, m) < 1:
        raise ConfigurationError("n_features, samples_per_node and m must be positive")
    if separation < 0:
        raise ConfigurationError("separation must be nonnegative")
    if not 0 <= seed < 2**64:
        raise ConfigurationError(f"seed must be an unsigned 64-bit integer, got {seed}")
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal(n_features)
    direction /= np.linalg.norm(direction)

    count = samples_per_node * m
    node = np.repeat(np.arange(m), samples_per_node)
    labels = np.where(np.tile(np.arange(samples_per_node), m) % 2 == 0, 1.0, -1.0)
    features = labels[:, None] * separation * direction + rng.standard_normal((count, n_features))
    return labels, features, node, direction


def write_dataset(path: Path, labels: np.ndarray, features: np.ndarray, node: np.ndarray | None = None) -> Path:
    """Write samples in the ingestion format, with a 1-based node column when given."""
    path = Path(path)
    columns = [labels[:, None], features]
    if node is not None:
        columns.append((node + 1)[:, None])
    table = np.hstack(columns)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w") as fh:
            for row in table:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
    except OSError as exc:
        raise DataError(f"cannot write dataset {path}: {exc}") from exc
    return path


def heldout_path(path: Path) -> Path:
    """Companion file name for the held-out split of a generated dataset."""
    path = Path(path)
    return path.with_name(f"{path.stem}.heldout{path.suffix or '.csv'}")


def generate_dataset_files(
    out_path: Path,
    n_features: int,
    samples_per_node: int,
    m: int,
    separation: float,
    seed: int,
    heldout_samples: int = 500,
) -> tuple[Path, Path]:
    """Generate the training file (with node column) and a held-out file.

    Both files are pure functions of the seed, so reruns are byte-identical.
    """
    labels, features, node, direction = generate_dataset(n_features, samples_per_node, m, separation, seed)
    rng = np.random.default_rng([seed, 1])
    held_labels = np.where(np.arange(heldout_samples) % 2 == 0, 1.0, -1.0)
    held_features = held_labels[:, None] * separation * direction + rng.standard_normal((heldout_samples, n_features))
    main = write_dataset(out_path, labels, features, node)
    held = write_dataset(heldout_path(out_path), held_labels, held_features)
    logger.info("Wrote %d samples to %s and %d held-out samples to %s", labels.size, main, heldout_samples, held)
    return main, held


def load_heldout(path: Path) -> Dataset:
    """Read a held-out file as a single-node dataset."""
    path = Path(path)
    try:
        table = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read held-out data {path}: {exc}") from exc
    count = table.shape[0]
    return Dataset(
        features=table[:, 1:],
        labels=_remap_labels(table[:, 0], path),
        node=np.zeros(count, dtype=int),
        is_val=np.ones(count, dtype=bool),
    )
