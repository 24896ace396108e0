"""The trace-exponential acyclicity measure and thresholding to exact DAGs."""

from __future__ import annotations

import math

import networkx as nx
import numpy as np
import scipy.linalg
import torch

from causal_cde.errors import ContractViolation
from causal_cde.graphs.dag import Dag, WeightedAdjacency

# Below this 1-norm the power series converges fast and avoids the
# cancellation in Tr(expm(A)) - D for nearly acyclic matrices.
_SERIES_NORM_LIMIT = 1.0
_SERIES_MAX_TERMS = 200


def _as_adjacency(A: WeightedAdjacency | np.ndarray) -> WeightedAdjacency:
    if isinstance(A, WeightedAdjacency):
        return A
    return WeightedAdjacency(np.asarray(A, dtype=np.float64))


def acyclicity(A: WeightedAdjacency | np.ndarray) -> float:
    """h(A) = Tr(exp(A)) - D.

    Zero exactly when the support of A has no directed cycle. Small matrices are
    summed as sum_{k>=2} Tr(A^k)/k! so that tiny cycle weights keep full relative
    accuracy; larger ones go through scipy's Pade scaling-and-squaring expm.
    """
    entries = _as_adjacency(A).entries
    dim = entries.shape[0]
    if np.abs(entries).sum(axis=0).max(initial=0.0) <= _SERIES_NORM_LIMIT:
        total = 0.0
        power = entries.copy()
        factorial = 1.0
        for k in range(2, _SERIES_MAX_TERMS):
            power = power @ entries
            factorial *= k
            total += float(np.trace(power)) / factorial
            if not power.any():
                break
            # Traces of single powers vanish on cycles longer than k, so no
            # stopping before k = D. Past that the tail is bounded by
            # D * |A^k|_1 * e / (k + 1)!.
            if k >= dim:
                tail = dim * np.abs(power).sum(axis=0).max() * math.e / (factorial * (k + 1))
                if tail <= 1e-17 * total:
                    break
        return max(total, 0.0)
    value = float(np.trace(scipy.linalg.expm(entries))) - dim
    return max(value, 0.0)


def acyclicity_tensor(A: torch.Tensor) -> torch.Tensor:
    """Differentiable h for training; gradient is exp(A)^T."""
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ContractViolation(f"adjacency must be square, got shape {tuple(A.shape)}")
    return torch.trace(torch.linalg.matrix_exp(A)) - A.shape[0]


def is_acyclic(A: WeightedAdjacency | np.ndarray, support_tol: float = 0.0) -> bool:
    """True iff the graph on edges {(j, i): A_ij > support_tol} has a topological order."""
    if support_tol < 0:
        raise ContractViolation(f"support_tol must be >= 0, got {support_tol}")
    return nx.is_directed_acyclic_graph(_as_adjacency(A).support_graph(support_tol))


def threshold_to_dag(A: WeightedAdjacency | np.ndarray) -> tuple[Dag, WeightedAdjacency]:
    """Zero the smallest positive weight until the support is acyclic.

    Equal weights are removed in lexicographic (i, j) order.
    """
    pruned = _as_adjacency(A).copy()
    entries = pruned.entries
    rows, cols = np.nonzero(entries > 0)
    order = sorted(zip(entries[rows, cols].tolist(), rows.tolist(), cols.tolist()))
    graph = pruned.support_graph(0.0)
    for _, i, j in order:
        if nx.is_directed_acyclic_graph(graph):
            break
        entries[i, j] = 0.0
        graph.remove_edge(j, i)
    return Dag.from_matrix(entries, tol=0.0), pruned


def series_acyclicity(A: np.ndarray, terms: int = 30) -> float:
    """Plain truncated power series for Tr(exp(A)) - D, kept as a cross-check."""
    A = np.asarray(A, dtype=np.float64)
    total = 0.0
    power = np.eye(A.shape[0])
    for k in range(1, terms + 1):
        power = power @ A
        total += float(np.trace(power)) / math.factorial(k)
    return total
