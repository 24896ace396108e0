"""Random DAG samplers: Erdos-Renyi and scale-free (Barabasi-Albert)."""

from __future__ import annotations

from enum import Enum

import networkx as nx
import numpy as np

from causal_cde.errors import ContractViolation
from causal_cde.graphs.dag import Dag


class GraphScheme(str, Enum):
    """Random graph families."""

    ER = "er"
    SF = "sf"


def _attachment_count(dim: int, expected_edges: float) -> int:
    """Edges added per new node so that m * (dim - m) is closest to the target."""
    best = min(range(1, dim), key=lambda m: (abs(m * (dim - m) - expected_edges), m))
    return best


def sample_random_dag(
    dim: int,
    expected_edges: float,
    scheme: GraphScheme | str,
    rng: np.random.Generator,
) -> Dag:
    """Draw a random DAG with roughly ``expected_edges`` edges.

    ER: a uniform random node order, then each of the D(D-1)/2 order-respecting
    edges independently with p = expected_edges / (D(D-1)/2).

    SF: a Barabasi-Albert skeleton, each edge oriented from the earlier-attached
    to the later-attached node, with node labels shuffled afterwards.
    """
    scheme = GraphScheme(scheme)
    if dim < 1:
        raise ContractViolation(f"dimension must be positive, got {dim}")
    max_edges = dim * (dim - 1) / 2
    if expected_edges < 0 or expected_edges > max_edges:
        raise ContractViolation(
            f"expected_edges={expected_edges} infeasible for {dim} nodes (max {max_edges:g})"
        )
    if expected_edges == 0 or dim == 1:
        return Dag.empty(dim)

    order = rng.permutation(dim)
    if scheme is GraphScheme.ER:
        p = expected_edges / max_edges
        edges = []
        for a in range(dim):
            for b in range(a + 1, dim):
                if rng.random() < p:
                    edges.append((int(order[a]), int(order[b])))
        return Dag.from_edges(dim, edges)

    m = _attachment_count(dim, expected_edges)
    skeleton = nx.barabasi_albert_graph(dim, m, seed=int(rng.integers(2**31 - 1)))
    edges = [(int(order[min(u, v)]), int(order[max(u, v)])) for u, v in skeleton.edges()]
    return Dag.from_edges(dim, edges)
