"""Experiment pipeline, artifacts, check workflow, sweeps and the CLI."""

import asyncio
import csv

import pytest

from distributed_bilevel.cli import main
from distributed_bilevel.config import serialize_config
from distributed_bilevel.errors import ConfigurationError, DivergenceError
from distributed_bilevel.experiment import (
    BOUNDS_KV_FILE,
    CONFIG_FILE,
    HEADER_FILE,
    LOG_FILE,
    REFERENCE_FILE,
    STATE_FILE,
    SWEEP_FILE,
    TRAJECTORY_FILE,
    check_pipeline,
    experiment_pipeline,
    read_log,
    run_sweep,
    sweep_configs,
)
from distributed_bilevel.state_solver import METRIC_COLUMNS, RunLog
from distributed_bilevel.templates import LOG_SCHEMA


def data_rows(path):
    return [line for line in path.read_text().splitlines() if line and not line.startswith("#")]


def test_zero_horizon_logs_one_row(synthetic_config, tmp_path):
    result = experiment_pipeline.invoke({"config": synthetic_config(K=0)})
    assert result["exit_code"] == 0
    assert len(data_rows(result["output_dir"] / LOG_FILE)) == 1


def test_artifacts_and_log_schema(synthetic_config):
    result = experiment_pipeline.invoke({"config": synthetic_config(K=20)})
    out = result["output_dir"]
    for name in (HEADER_FILE, LOG_FILE, TRAJECTORY_FILE, STATE_FILE, CONFIG_FILE):
        assert (out / name).is_file()
    lines = (out / LOG_FILE).read_text().splitlines()
    assert lines[0] == f"# schema: {LOG_SCHEMA}"
    assert lines[1] == "# columns: " + ",".join(METRIC_COLUMNS)
    assert "# completed: true" in lines
    log = read_log(out / LOG_FILE)
    assert [r.k for r in log.records] == list(range(21))
    header = (out / HEADER_FILE).read_text()
    assert "# rho:" in header
    assert "# alpha_max=" in header
    assert "# caps_exceeded: alpha,beta,gamma" in header
    assert "forced past caps" in header


def test_reruns_are_byte_identical(synthetic_config, tmp_path):
    first = experiment_pipeline.invoke({"config": synthetic_config(K=30, output_dir=tmp_path / "a")})
    second = experiment_pipeline.invoke({"config": synthetic_config(K=30, output_dir=tmp_path / "b")})
    for name in (LOG_FILE, TRAJECTORY_FILE, STATE_FILE):
        assert (first["output_dir"] / name).read_bytes() == (second["output_dir"] / name).read_bytes()


def test_summary_reports_distance_to_optimum(synthetic_config):
    result = experiment_pipeline.invoke({"config": synthetic_config(K=10)})
    summary = result["summary"]
    assert summary["k"] == 10.0
    assert summary["x_err"] == pytest.approx(0.25, abs=0.05)
    assert summary["penalty_gap"] == pytest.approx(1.0 / 204.0, abs=1e-8)
    assert summary["b_f_sq"] > 0.0


def test_divergence_writes_partial_artifacts(synthetic_config):
    result = experiment_pipeline.invoke({"config": synthetic_config(K=500, alpha=10.0, beta=10.0, gamma=10.0)})
    assert result["exit_code"] == 2
    assert "divergence" in result["error"]
    out = result["output_dir"]
    assert "# completed: false" in (out / LOG_FILE).read_text().splitlines()
    assert (out / STATE_FILE).is_file()
    assert "summary" not in result


def test_reference_run_is_written(synthetic_config):
    result = experiment_pipeline.invoke({"config": synthetic_config(K=10, run_extra="reference = true")})
    assert (result["output_dir"] / REFERENCE_FILE).is_file()
    assert "reference_gap" in result["summary"]


def test_diverging_reference_keeps_distributed_run(synthetic_config, monkeypatch):
    def diverging_reference(problem, p, constants, log_interval, tol, d4_variant):
        exc = DivergenceError(k=3, peak=1e13, block="x")
        exc.partial_log = RunLog()
        raise exc

    monkeypatch.setattr("distributed_bilevel.experiment.run_centralized", diverging_reference)
    result = experiment_pipeline.invoke({"config": synthetic_config(K=10, run_extra="reference = true")})
    assert result["exit_code"] == 0
    assert "error" not in result
    assert result["run_log"].completed
    assert [r.k for r in result["run_log"].records] == list(range(11))
    assert not result["reference_log"].completed
    assert "reference_gap" not in result["summary"]
    out = result["output_dir"]
    assert "reference run diverged" in (out / HEADER_FILE).read_text()
    assert len(data_rows(out / LOG_FILE)) == 11
    assert (out / REFERENCE_FILE).is_file()


def test_bound_checks_and_check_workflow(synthetic_config):
    config = synthetic_config(K=15, alpha=1e-7, beta=1e-7, gamma=1e-6, monitor_extra="bound_checks = true")
    result = experiment_pipeline.invoke({"config": config})
    report = result["bound_report"]
    out = result["output_dir"]
    assert (out / BOUNDS_KV_FILE).is_file()
    for name in ("inner_penalty_gap", "outer_penalty_gap", "gradient_approximation", "averaged_rate", "consensus_z_recurrence"):
        assert name in report.names()

    rechecked = check_pipeline.invoke({"run_dir": out})
    again = rechecked["bound_report"]
    assert again.names() == report.names()
    assert [c.passed for c in again.checks] == [c.passed for c in report.checks]
    assert rechecked["exit_code"] == (0 if again.passed else 3)
    assert main(["check", str(out)]) == rechecked["exit_code"]


def test_lambda_sweep_penalty_gap_column(synthetic_config, tmp_path):
    lams = [5.0, 10.0, 20.0, 40.0, 80.0]
    results = asyncio.run(run_sweep(synthetic_config(K=5), "lambda", lams, base_dir=tmp_path / "sweep"))
    assert [r.value for r in results] == lams
    for r in results:
        assert r.status == "ok"
        assert r.penalty_gap == pytest.approx(1.0 / (4.0 + 10.0 * r.value), abs=1e-8)
        assert r.output_dir.name == f"lambda={r.value:g}"
    with (tmp_path / "sweep" / SWEEP_FILE).open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 5
    assert rows[0]["status"] == "ok"


def test_sweep_records_divergence_and_continues(synthetic_config, tmp_path):
    config = synthetic_config(alpha=10.0, beta=10.0, gamma=10.0)
    results = asyncio.run(run_sweep(config, "K", [1, 200], base_dir=tmp_path / "sweep"))
    assert [r.status for r in results] == ["ok", "diverged"]
    assert results[1].message


def test_sweep_validation(synthetic_config, tmp_path):
    config = synthetic_config()
    with pytest.raises(ConfigurationError):
        sweep_configs(config, "lambda", [])
    with pytest.raises(ConfigurationError):
        sweep_configs(config, "lambda", [0.0])
    with pytest.raises(ConfigurationError):
        sweep_configs(config, "lambda", [5.0], scaling="corollary1")
    with pytest.raises(ConfigurationError):
        sweep_configs(config, "rho-proxy", [1.5])


def test_corollary_scaling_rescales_from_configured_horizon(synthetic_config, tmp_path):
    config = synthetic_config(K=1000)
    scaled = sweep_configs(config, "K", [1000, 8000], scaling="corollary1", base_dir=tmp_path)
    assert scaled[0].stepsizes.alpha == pytest.approx(0.0007)
    assert scaled[1].stepsizes.alpha == pytest.approx(0.0007 / 4.0)
    assert scaled[1].stepsizes.K == 8000
    assert scaled[1].stepsizes.force


def test_rho_proxy_sweep_sets_edge_probability(synthetic_config, tmp_path):
    configs = sweep_configs(synthetic_config(), "rho-proxy", [0.4, 0.9], base_dir=tmp_path)
    assert [c.network.p for c in configs] == [0.4, 0.9]
    assert configs[0].run.output_dir == tmp_path / "rho-proxy=0.4"


# ===== CLI =====

def test_cli_run_and_seed_override(synthetic_config, tmp_path):
    conf = tmp_path / "exp.conf"
    conf.write_text(serialize_config(synthetic_config(K=5)))
    out = tmp_path / "cli-run"
    assert main(["run", str(conf), "--quiet", "--seed", "3", "--output-dir", str(out)]) == 0
    echoed = (out / CONFIG_FILE).read_text()
    assert "seed = 3" in echoed
    assert "init_seed = 3" in echoed


def test_cli_maps_errors_to_exit_codes(synthetic_config, tmp_path):
    bad = tmp_path / "bad.conf"
    bad.write_text("[problem]\nfamily = synthetic\n")
    assert main(["run", str(bad), "--quiet"]) == 1
    conf = tmp_path / "diverge.conf"
    conf.write_text(serialize_config(synthetic_config(K=500, alpha=10.0, beta=10.0, gamma=10.0)))
    assert main(["run", str(conf), "--quiet"]) == 2
    assert main(["sweep", str(conf), "--axis", "lambda", "--values", ""]) == 1


def test_cli_gen_data_then_logistic_run(tmp_path):
    data = tmp_path / "data" / "toy.csv"
    assert main(["gen-data", "--n-features", "4", "--samples-per-node", "10", "--m", "3", "--seed", "1", "--heldout-samples", "30", "--out", str(data)]) == 0
    conf = tmp_path / "logistic.conf"
    conf.write_text(
        "[problem]\nfamily = logistic\ndataset = data/toy.csv\nheldout = data/toy.heldout.csv\nassignment = column\n"
        "[network]\nmodel = ring\nm = 3\n"
        "[stepsizes]\nalpha = 0.001\nbeta = 0.001\ngamma = 0.01\nlambda = 10\nK = 20\nforce = true\n"
        f"[run]\noutput_dir = {tmp_path / 'logistic-run'}\n"
    )
    assert main(["run", str(conf), "--quiet"]) == 0
    assert len(data_rows(tmp_path / "logistic-run" / LOG_FILE)) == 21
