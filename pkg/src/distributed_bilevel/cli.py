"""Command-line front end: run, sweep, check and gen-data.

Exit codes: 0 success, 1 configuration, data or I/O error, 2 divergence
(partial artifacts are written first), 3 bound violations found by check.
"""

import argparse
import asyncio
import logging
from pathlib import Path

from rich.table import Table
from typing_extensions import Optional, Sequence

from distributed_bilevel.config import parse_config, with_output_dir, with_seed
from distributed_bilevel.datasets import generate_dataset_files
from distributed_bilevel.errors import BilevelError, DivergenceError
from distributed_bilevel.experiment import HEADER_FILE, check_pipeline, experiment_pipeline, run_sweep
from distributed_bilevel.templates import sweep_columns
from distributed_bilevel.utils import configure_logging, console, show_header, summary_table

logger = logging.getLogger(__name__)

# ===== SUBCOMMANDS =====

def _load(args: argparse.Namespace):
    config = with_seed(parse_config(args.config), args.seed)
    if args.output_dir is not None:
        config = with_output_dir(config, args.output_dir)
    return config


def cmd_run(args: argparse.Namespace) -> int:
    """Run one experiment and write its artifacts."""
    config = _load(args)
    result = experiment_pipeline.invoke({"config": config})
    out = result["output_dir"]
    if not args.quiet:
        show_header((out / HEADER_FILE).read_text(), title=f"Run header ({out})")
        summary = result.get("summary")
        if summary:
            table = Table(title="Run summary")
            table.add_column("quantity")
            table.add_column("value", justify="right")
            for key, value in summary.items():
                table.add_row(key, f"{value:.6g}")
            console.print(table)
        if result.get("bound_report") is not None:
            console.print(result["bound_report"].to_table())
    if result.get("error"):
        logger.error("%s (partial artifacts in %s)", result["error"], out)
    return result.get("exit_code", 0)


def cmd_sweep(args: argparse.Namespace) -> int:
    """Run one experiment per value and print the summary table."""
    config = _load(args)
    values = [float(v) for v in args.values.split(",") if v.strip()]
    results = asyncio.run(run_sweep(config, args.axis, values, args.scaling, args.output_dir))
    rows = [{key: getattr(r, key) for key in sweep_columns} for r in results]
    console.print(summary_table(f"{args.axis} sweep ({args.scaling})", rows, list(sweep_columns)))
    return 0


def cmd_check(args: argparse.Namespace) -> int:
    """Re-run bound checks over an existing run directory."""
    result = check_pipeline.invoke({"run_dir": Path(args.run_dir)})
    report = result["bound_report"]
    console.print(report.to_table())
    for notice in report.notices:
        console.print(f"[yellow]notice:[/yellow] {notice}")
    return result.get("exit_code", 0)


def cmd_gen_data(args: argparse.Namespace) -> int:
    """Write a seeded two-cluster dataset plus its held-out companion."""
    train, held = generate_dataset_files(
        Path(args.out), args.n_features, args.samples_per_node, args.m, args.separation, args.seed, args.heldout_samples
    )
    console.print(f"wrote {train} and {held}")
    return 0

# ===== ENTRY POINT =====

def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subparser per subcommand."""
    parser = argparse.ArgumentParser(prog="dbo-sim", description="Distributed bilevel penalty solver simulator")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug logging")
    sub = parser.add_subparsers(dest="cmd", required=True)

    run_p = sub.add_parser("run", help="Run one experiment from a config file")
    run_p.add_argument("config", type=Path)
    run_p.add_argument("--seed", type=int, default=None, help="Override network and init seeds")
    run_p.add_argument("--output-dir", type=Path, default=None)
    run_p.add_argument("--quiet", action="store_true", help="Do not render the header and summary")

    sweep_p = sub.add_parser("sweep", help="Run one experiment per value of an axis")
    sweep_p.add_argument("config", type=Path)
    sweep_p.add_argument("--axis", choices=["lambda", "K", "rho-proxy"], required=True)
    sweep_p.add_argument("--values", required=True, help="Comma-separated values")
    sweep_p.add_argument("--scaling", choices=["fixed", "corollary1", "corollary2"], default="fixed")
    sweep_p.add_argument("--seed", type=int, default=None)
    sweep_p.add_argument("--output-dir", type=Path, default=None)

    check_p = sub.add_parser("check", help="Re-run bound checks on an existing run directory")
    check_p.add_argument("run_dir", type=Path)

    gen_p = sub.add_parser("gen-data", help="Generate a two-cluster logistic dataset")
    gen_p.add_argument("--n-features", type=int, default=20)
    gen_p.add_argument("--samples-per-node", type=int, default=100)
    gen_p.add_argument("--m", type=int, default=10)
    gen_p.add_argument("--separation", type=float, default=4.0)
    gen_p.add_argument("--seed", type=int, default=0)
    gen_p.add_argument("--heldout-samples", type=int, default=500)
    gen_p.add_argument("--out", type=Path, required=True)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, dispatch, and map library errors to exit codes."""
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    commands = {"run": cmd_run, "sweep": cmd_sweep, "check": cmd_check, "gen-data": cmd_gen_data}
    try:
        return commands[args.cmd](args)
    except DivergenceError as exc:
        logger.error("%s", exc)
        return 2
    except BilevelError as exc:
        logger.error("%s", exc)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
