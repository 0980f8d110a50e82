"""Text templates for run artifacts.

This module contains the fixed layouts of every text artifact the harness
writes: the run header, the per-iteration log header, the trajectory file
and the sweep summary. Keeping them in one place keeps the schemas stable.
"""

LOG_SCHEMA = "dbo-log/1"

run_header_template = """# schema: {schema}
# family: {family}
# m: {m}
# n: {n}
# r: {r}
# network: {network}
# rho: {rho!r}
# edges: {edges}
#
# [smoothness]
{smoothness}
#
# [constants]
{constants}
#
# [caps]
{caps}
# caps_exceeded: {exceeded}
#
# [stepsizes]
{stepsizes}
# log_interval: {log_interval}
# tol: {tol!r}
#
# [notes]
{notes}
#
# [config]
{config}
"""

log_header_template = """# schema: {schema}
# columns: {columns}
# log_interval: {log_interval}
# completed: {completed}
"""

trajectory_header_template = """# schema: {schema}
# x_bar at every logged k; columns: k, x_1..x_n
"""

state_template = """# final iterate at k={k}, one row per node
# [x]
{x}
# [y]
{y}
# [z]
{z}
"""

reference_header_template = """# schema: {schema}
# centralized reference run on network-averaged oracles (W = [1])
# columns: {columns}
"""

sweep_columns = (
    "value",
    "status",
    "final_grad_phi_sq",
    "mean_grad_phi_sq",
    "penalty_gap",
    "C_sq",
    "B_sq",
    "message",
)


def key_values(pairs: dict[str, object]) -> str:
    """Render '# key=value' lines with full float precision."""
    return "\n".join(f"# {key}={value!r}" if isinstance(value, float) else f"# {key}={value}" for key, value in pairs.items())
