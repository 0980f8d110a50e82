"""Shared fixtures: reference problems, small networks and config builders."""

import numpy as np
import pytest

from distributed_bilevel.config import parse_config_text
from distributed_bilevel.datasets import generate_dataset_files, load_dataset, load_heldout
from distributed_bilevel.network import complete, erdos_renyi, metropolis_weights
from distributed_bilevel.problems import make_logistic_hyperopt, make_reference_synthetic

SYNTHETIC_CONFIG = """
[problem]
family = synthetic

[network]
model = erdos-renyi
m = 10
p = 0.7
seed = 42

[stepsizes]
alpha = {alpha}
beta = {beta}
gamma = {gamma}
lambda = {lam}
K = {K}
force = true

[run]
output_dir = {output_dir}
{run_extra}

[monitors]
{monitor_extra}
"""


@pytest.fixture
def reference_problem():
    return make_reference_synthetic()


@pytest.fixture
def er_mixing():
    return metropolis_weights(erdos_renyi(10, 0.7, seed=42))


@pytest.fixture
def complete_mixing():
    return metropolis_weights(complete(10))


@pytest.fixture
def synthetic_config(tmp_path):
    """Factory for explicit-step synthetic configs writing under tmp_path."""

    def make(
        K=200,
        alpha=0.0007,
        beta=0.001,
        gamma=0.01,
        lam=20,
        output_dir=None,
        run_extra="",
        monitor_extra="",
    ):
        text = SYNTHETIC_CONFIG.format(
            alpha=alpha,
            beta=beta,
            gamma=gamma,
            lam=lam,
            K=K,
            output_dir=output_dir or tmp_path / "run",
            run_extra=run_extra,
            monitor_extra=monitor_extra,
        )
        return parse_config_text(text)

    return make


@pytest.fixture
def logistic_files(tmp_path):
    """Small generated two-cluster dataset on four nodes."""
    return generate_dataset_files(tmp_path / "data" / "small.csv", 5, 20, 4, 2.0, 3, heldout_samples=40)


@pytest.fixture
def logistic_problem(logistic_files):
    main, held = logistic_files
    data = load_dataset(main, 4, "column")
    return make_logistic_hyperopt(data, 4, heldout=load_heldout(held))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
