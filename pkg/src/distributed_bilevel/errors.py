"""Exception hierarchy for the distributed bilevel simulator.

Every failure the library raises on purpose derives from BilevelError so the
command line can map them to exit codes in one place.
"""

from typing_extensions import Any, Optional


class BilevelError(Exception):
    """Base class for all simulator errors."""


class ConfigurationError(BilevelError):
    """Invalid experiment configuration or inconsistent problem setup.

    Carries the offending key and the config line when they are known.
    """

    def __init__(self, message: str, line: Optional[int] = None, key: Optional[str] = None):
        self.detail = message
        self.line = line
        self.key = key
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


class DataError(BilevelError):
    """Malformed dataset contents (bad labels, ragged rows)."""


class GenerationError(BilevelError):
    """Random graph generation exhausted its attempt budget."""


class NotConnectedError(BilevelError):
    """Mixing weights requested for a disconnected graph."""


class MixingMatrixError(BilevelError):
    """Matrix is not symmetric and doubly stochastic."""

    def __init__(self, message: str, row_sums: Any = None, col_sums: Any = None):
        self.row_sums = row_sums
        self.col_sums = col_sums
        super().__init__(message)


class InvalidNetworkError(BilevelError):
    """Spectral quantity outside [0, 1) where the analysis requires it."""


class NumericalError(BilevelError):
    """Linear algebra failure such as a non positive-definite system."""


class OracleError(BilevelError):
    """An oracle evaluation failed on a specific node."""

    def __init__(self, node: int, cause: BaseException):
        self.node = node
        self.cause = cause
        super().__init__(f"oracle failure on node {node}: {cause}")


class DivergenceError(BilevelError):
    """Iterates became non-finite or exceeded the magnitude guard.

    The partially built run log is attached by the run loop so callers can
    still write artifacts for the prefix that completed.
    """

    def __init__(self, k: int, peak: float, block: str):
        self.k = k
        self.peak = peak
        self.block = block
        self.partial_log: Any = None
        super().__init__(f"divergence at iteration {k}: max |{block}| = {peak!r}")


class ArtifactError(BilevelError):
    """A run artifact could not be written or read back."""

    def __init__(self, path: Any, cause: BaseException):
        self.path = path
        super().__init__(f"{path}: {cause}")
