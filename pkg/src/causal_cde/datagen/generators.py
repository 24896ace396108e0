"""Synthetic data by ancestral sampling: GP-CDE prior draws and random neural SCMs.

Every node owns a child random stream derived from the dataset seed, so
overwriting one column only changes the values of its descendants.
"""

from __future__ import annotations

import logging
from typing import Mapping

import numpy as np
import torch

from causal_cde.config import GeneratorKind, GeneratorSpec, GraphKind
from causal_cde.datagen.dataset import Dataset
from causal_cde.errors import ContractViolation
from causal_cde.gp import DTYPE, STATIONARY_KERNELS, NodeKernelParams, eval_kernel, jitter_cholesky
from causal_cde.graphs import Dag, sample_random_dag, topological_order

logger = logging.getLogger("causal_cde.datagen")

GP_MAX_SAMPLES = 3000
GP_JITTER = 1e-8
GP_KERNEL_POOL = ("m12", "m32", "m52", "sqe", "rq")
NN_HIDDEN = 128
Intervention = Mapping[int, np.ndarray]


def _node_streams(dim: int, rng: np.random.Generator) -> list[np.random.Generator]:
    return [np.random.default_rng(int(s)) for s in rng.integers(0, 2**63 - 1, size=dim)]


def _check_intervention(intervene: Intervention | None, dim: int, n: int) -> dict[int, np.ndarray]:
    overrides = {}
    for node, values in (intervene or {}).items():
        if not 0 <= node < dim:
            raise ContractViolation(f"intervention on unknown node {node}")
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (n,):
            raise ContractViolation(f"intervention on node {node} needs {n} values")
        overrides[int(node)] = values
    return overrides


# ============================================================================
# GP-CDE PRIOR
# ============================================================================


def draw_gp_mechanism(input_dim: int, rng: np.random.Generator) -> tuple[NodeKernelParams, float]:
    """Linear kernel plus one stationary kernel chosen at random; returns (kernel, noise std).

    theta ~ Gamma(1.5, 1) per input dimension, amplitude ~ U(1, 100),
    noise std ~ U(0.01, 1), rq shape ~ U(0.1, 10).
    """
    other = str(rng.choice(GP_KERNEL_POOL))
    enabled = ("lin", other)
    theta = {
        name: torch.as_tensor(rng.gamma(1.5, 1.0, size=input_dim), dtype=DTYPE) for name in enabled
    }
    variance = {
        name: torch.tensor(float(rng.uniform(1.0, 100.0)), dtype=DTYPE)
        for name in enabled
        if name in STATIONARY_KERNELS
    }
    rq_shape = torch.tensor(float(rng.uniform(0.1, 10.0)), dtype=DTYPE)
    noise_std = float(rng.uniform(0.01, 1.0))
    return NodeKernelParams(theta, variance, rq_shape, enabled), noise_std


def sample_gpcde_dataset(
    dag: Dag,
    N: int,
    rng: np.random.Generator,
    intervene: Intervention | None = None,
) -> Dataset:
    """x_i = f_i(x_PA(i), w_i) + noise with f_i drawn from a GP prior, w_i ~ N(0, 1)."""
    if N > GP_MAX_SAMPLES:
        raise ContractViolation(f"GP sampling factorizes an N x N matrix; N must be <= {GP_MAX_SAMPLES}")
    if N < 1:
        raise ContractViolation(f"need at least one sample, got {N}")
    overrides = _check_intervention(intervene, dag.dim, N)
    streams = _node_streams(dag.dim, rng)
    X = np.zeros((N, dag.dim))
    for node in topological_order(dag):
        if node in overrides:
            X[:, node] = overrides[node]
            continue
        stream = streams[node]
        parents = dag.parents(node)
        kernel, noise_std = draw_gp_mechanism(len(parents) + 1, stream)
        inputs = np.hstack([X[:, parents], stream.standard_normal((N, 1))])
        with torch.no_grad():
            K = eval_kernel(kernel, inputs, inputs)
            L = jitter_cholesky(K, GP_JITTER)
            f = L @ torch.as_tensor(stream.standard_normal(N), dtype=DTYPE)
        X[:, node] = f.numpy() + noise_std * stream.standard_normal(N)
        logger.debug(f"node {node}: kernels {kernel.enabled}, parents {parents}")
    return Dataset(X, provenance={"generator": "gp", "edges": dag.sorted_edges()})


# ============================================================================
# NEURAL-NETWORK SCM
# ============================================================================


def draw_nn_mechanism(input_dim: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Weights of a (input_dim, 128, 128, 1) ReLU network, He-normal, zero biases."""
    widths = [input_dim, NN_HIDDEN, NN_HIDDEN, 1]
    return [
        rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        for fan_in, fan_out in zip(widths[:-1], widths[1:])
    ]


def apply_nn_mechanism(weights: list[np.ndarray], inputs: np.ndarray) -> np.ndarray:
    hidden = inputs
    for W in weights[:-1]:
        hidden = np.maximum(hidden @ W, 0.0)
    return (hidden @ weights[-1])[:, 0]


def sample_nn_scm(
    dag: Dag,
    N: int,
    rng: np.random.Generator,
    intervene: Intervention | None = None,
) -> Dataset:
    """x_i = MLP_i(x_PA(i), eps_i) with eps_i ~ N(0, 1) and a fresh random MLP per node."""
    if N < 1:
        raise ContractViolation(f"need at least one sample, got {N}")
    overrides = _check_intervention(intervene, dag.dim, N)
    streams = _node_streams(dag.dim, rng)
    X = np.zeros((N, dag.dim))
    for node in topological_order(dag):
        if node in overrides:
            X[:, node] = overrides[node]
            continue
        stream = streams[node]
        parents = dag.parents(node)
        weights = draw_nn_mechanism(len(parents) + 1, stream)
        inputs = np.hstack([X[:, parents], stream.standard_normal((N, 1))])
        X[:, node] = apply_nn_mechanism(weights, inputs)
    return Dataset(X, provenance={"generator": "nn", "edges": dag.sorted_edges()})


# ============================================================================
# FROM A GENERATOR SPEC
# ============================================================================


def ground_truth_graph(spec: GeneratorSpec, rng: np.random.Generator) -> Dag:
    if spec.graph is GraphKind.EMPTY:
        return Dag.empty(spec.d)
    if spec.graph is GraphKind.CHAIN:
        return Dag.from_edges(spec.d, [(k, k + 1) for k in range(spec.d - 1)])
    if spec.graph is GraphKind.EDGES:
        assert spec.edge_list is not None
        return Dag.from_edges(spec.d, spec.edge_list)
    return sample_random_dag(spec.d, spec.edges, spec.graph.value, rng)


def generate(spec: GeneratorSpec) -> tuple[Dataset, Dag]:
    """Graph and data for a spec; identical specs give identical output."""
    rng = np.random.default_rng(spec.seed)
    dag = ground_truth_graph(spec, rng)
    if spec.generator is GeneratorKind.GP:
        dataset = sample_gpcde_dataset(dag, spec.n, rng)
    else:
        dataset = sample_nn_scm(dag, spec.n, rng)
    dataset.provenance = spec.model_dump(mode="json")
    dataset.seed = spec.seed
    return dataset, dag
