"""Pytest configuration and fixtures for causal-cde tests."""

import numpy as np
import pytest

from causal_cde.config import TrainConfig
from causal_cde.graphs import Dag


@pytest.fixture
def chain3():
    """0 -> 1 -> 2."""
    return Dag.from_edges(3, [(0, 1), (1, 2)])


@pytest.fixture
def collider3():
    """0 -> 2 <- 1."""
    return Dag.from_edges(3, [(0, 2), (1, 2)])


@pytest.fixture
def fork3():
    """1 <- 0 -> 2."""
    return Dag.from_edges(3, [(0, 1), (0, 2)])


@pytest.fixture
def tiny_config():
    """A schedule small enough for unit tests (seconds, not hours)."""
    return TrainConfig(
        num_inducing=8,
        batch_size=None,
        mc_samples=4,
        encoder_layers=2,
        encoder_hidden=8,
        warmup_steps=20,
        cooldown_steps=10,
        t_conv=5,
        max_constraint_steps=40,
        trace_every=5,
        discrete_inducing=8,
        discrete_adam_steps=20,
        discrete_bfgs_iters=1,
        lbfgs_max_iter=5,
        discrete_restarts=1,
    )


@pytest.fixture
def chain_data():
    """Standardized 60 x 3 samples from a noisy nonlinear chain."""
    rng = np.random.default_rng(3)
    x0 = rng.standard_normal(60)
    x1 = np.tanh(2.0 * x0) + 0.3 * rng.standard_normal(60)
    x2 = x1**2 + 0.3 * rng.standard_normal(60)
    X = np.column_stack([x0, x1, x2])
    return (X - X.mean(axis=0)) / X.std(axis=0)


@pytest.fixture
def data_csv(tmp_path, chain_data):
    """The chain data written as a dataset CSV with a header row."""
    path = tmp_path / "data.csv"
    header = "x0,x1,x2"
    np.savetxt(path, chain_data, delimiter=",", header=header, comments="", fmt="%.17g")
    return path


@pytest.fixture
def edge_files(tmp_path):
    """Ground truth 0->1->2 and a prediction with the second edge reversed."""
    true_path = tmp_path / "true.txt"
    true_path.write_text("0 1\n1 2\n")
    pred_path = tmp_path / "pred.txt"
    pred_path.write_text("0 1\n2 1\n")
    return true_path, pred_path
