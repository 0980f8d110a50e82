"""Console, Logging and Formatting Utilities.

This module holds the shared rich console, the logging setup used by the
command line, and small helpers for rendering run summaries.
"""

import logging
import os
from pathlib import Path

import numpy as np
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table
from rich.text import Text
from typing_extensions import Optional

console = Console(stderr=True)

# ===== UTILITY FUNCTIONS =====

def get_current_dir() -> Path:
    """Get the directory of this module.

    Returns:
        Path object representing the package directory
    """
    try:
        return Path(__file__).resolve().parent
    except NameError:  # __file__ is not defined
        return Path.cwd()


def shipped_config(name: str) -> Path:
    """Path of a configuration file shipped in the package's configs/ directory."""
    return get_current_dir() / "configs" / name


def default_output_dir() -> Path:
    """Output root from DBO_OUTPUT_DIR, falling back to ./runs."""
    return Path(os.environ.get("DBO_OUTPUT_DIR", "runs"))


def configure_logging(verbose: int = 0) -> None:
    """Install a RichHandler on the root logger.

    Args:
        verbose: 0 for warnings, 1 for info, 2 or more for debug
    """
    level = logging.WARNING if verbose <= 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, rich_tracebacks=True, show_path=False)],
        force=True,
    )

# ===== FORMATTING =====

def format_vector(v: np.ndarray) -> str:
    """Render a vector compactly, full precision for short ones."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.size <= 4:
        return "[" + ", ".join(f"{x:.6g}" for x in v) + "]"
    return f"[{v[0]:.4g}, {v[1]:.4g}, ..., {v[-1]:.4g}] (n={v.size})"


def show_header(text: str, title: str = "Run header", border_style: str = "blue") -> None:
    """Display key=value header lines in a panel with highlighted keys."""
    formatted = Text(text)
    formatted.highlight_regex(r"^[#\s]*[\w\.]+(?==)", style="bold cyan")
    formatted.highlight_regex(r"\[\w+\]", style="bold magenta")
    console.print(Panel(formatted, title=f"[bold green]{title}[/bold green]", border_style=border_style, padding=(1, 2)))


def summary_table(title: str, rows: list[dict[str, object]], columns: Optional[list[str]] = None) -> Table:
    """Build a rich table from homogeneous dict rows."""
    table = Table(title=title)
    columns = columns or (list(rows[0].keys()) if rows else [])
    for column in columns:
        table.add_column(column, justify="right" if column not in ("status", "message") else "left")
    for row in rows:
        table.add_row(*[_cell(row.get(column)) for column in columns])
    return table


def _cell(value: object) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)
