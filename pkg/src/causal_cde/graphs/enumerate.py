"""Exhaustive enumeration of labelled DAGs on a handful of nodes."""

from __future__ import annotations

import itertools

import networkx as nx

from causal_cde.errors import ContractViolation, EnumerationCapError
from causal_cde.graphs.dag import Dag

DEFAULT_ENUMERATION_CAP = 4


def enumerate_dags(dim: int, cap: int = DEFAULT_ENUMERATION_CAP) -> list[Dag]:
    """All labelled DAGs on ``dim`` nodes, in a fixed order (empty graph first).

    Counts are 1, 3, 25, 543 for dim = 1..4.
    """
    if dim < 1:
        raise ContractViolation(f"dimension must be positive, got {dim}")
    if dim > cap:
        raise EnumerationCapError(dim, cap)

    candidates = [(p, c) for p, c in itertools.permutations(range(dim), 2)]
    dags: list[Dag] = []
    for mask in range(1 << len(candidates)):
        edges = [edge for bit, edge in enumerate(candidates) if mask >> bit & 1]
        graph = nx.DiGraph(edges)
        if edges and not nx.is_directed_acyclic_graph(graph):
            continue
        dags.append(Dag.from_edges(dim, edges))
    return dags


def distinct_structures(dim: int, cap: int = DEFAULT_ENUMERATION_CAP) -> list[Dag]:
    """One representative per isomorphism class of DAGs on ``dim`` nodes.

    For three nodes these are: empty, single edge, chain, fork, collider and the
    fully connected DAG.
    """
    representatives: list[Dag] = []
    for dag in enumerate_dags(dim, cap):
        graph = dag.to_networkx()
        if any(nx.is_isomorphic(graph, rep.to_networkx()) for rep in representatives):
            continue
        representatives.append(dag)
    return representatives
