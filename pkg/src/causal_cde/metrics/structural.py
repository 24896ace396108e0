"""Graph-comparison metrics: SHD, directed-edge F1, d-separation and SID."""

from __future__ import annotations

from typing import Iterable

import networkx as nx
import numpy as np

from causal_cde.errors import ContractViolation
from causal_cde.graphs import Dag


def _check_dims(true_g: Dag, pred_g: Dag) -> None:
    if true_g.dim != pred_g.dim:
        raise ContractViolation(f"graphs differ in size: {true_g.dim} vs {pred_g.dim}")


def shd(true_g: Dag, pred_g: Dag) -> int:
    """Hamming distance between binary adjacency matrices; a reversal costs 2."""
    _check_dims(true_g, pred_g)
    return int(np.abs(true_g.to_matrix() - pred_g.to_matrix()).sum())


def precision_recall(true_g: Dag, pred_g: Dag) -> tuple[float, float]:
    """Directed-edge precision and recall; 0 when the denominator is empty."""
    _check_dims(true_g, pred_g)
    hits = len(true_g.edges & pred_g.edges)
    precision = hits / len(pred_g.edges) if pred_g.edges else 0.0
    recall = hits / len(true_g.edges) if true_g.edges else 0.0
    return precision, recall


def f1_score(true_g: Dag, pred_g: Dag) -> float:
    """Harmonic mean of directed-edge precision and recall (0 when both are 0)."""
    precision, recall = precision_recall(true_g, pred_g)
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


# ============================================================================
# D-SEPARATION
# ============================================================================


def _reachable(graph: nx.DiGraph, source: int, given: set[int]) -> set[int]:
    """Nodes with an active trail from ``source`` given ``given`` (Bayes ball).

    A trail through a collider is active only if the collider is in ``given``
    or has a descendant there, i.e. it is an ancestor of ``given``.
    """
    ancestors_of_given = set(given)
    for z in given:
        ancestors_of_given |= nx.ancestors(graph, z)

    # direction "up": arrived from a child; "down": arrived from a parent
    to_visit = [(source, "up")]
    visited: set[tuple[int, str]] = set()
    reachable: set[int] = set()
    while to_visit:
        node, direction = to_visit.pop()
        if (node, direction) in visited:
            continue
        visited.add((node, direction))
        if node not in given:
            reachable.add(node)
        if direction == "up" and node not in given:
            to_visit.extend((p, "up") for p in graph.predecessors(node))
            to_visit.extend((c, "down") for c in graph.successors(node))
        elif direction == "down":
            if node not in given:
                to_visit.extend((c, "down") for c in graph.successors(node))
            if node in ancestors_of_given:
                to_visit.extend((p, "up") for p in graph.predecessors(node))
    return reachable


def _d_separated(graph: nx.DiGraph, i: int, j: int, given: set[int]) -> bool:
    return j not in _reachable(graph, i, given)


def d_separated(g: Dag, i: int, j: int, Z: Iterable[int] = ()) -> bool:
    """True iff every trail between ``i`` and ``j`` is blocked by ``Z``."""
    given = {int(z) for z in Z}
    for node in (i, j, *given):
        if not 0 <= node < g.dim:
            raise ContractViolation(f"node {node} out of range for dim {g.dim}")
    if i == j:
        raise ContractViolation("d-separation needs two distinct nodes")
    if i in given or j in given:
        raise ContractViolation(f"nodes {i} and {j} must not be in the conditioning set")
    return _d_separated(g.to_networkx(), i, j, given)


# ============================================================================
# STRUCTURAL INTERVENTION DISTANCE
# ============================================================================


def causal_path_nodes(g: Dag, i: int, j: int) -> set[int]:
    """Nodes other than ``i`` lying on a directed path from ``i`` to ``j``."""
    graph = g.to_networkx()
    descendants = nx.descendants(graph, i)
    if j not in descendants:
        return set()
    return (descendants & nx.ancestors(graph, j)) | {j}


def valid_adjustment(true_g: Dag, i: int, j: int, Z: set[int]) -> bool:
    """Whether adjusting for ``Z`` identifies the effect of ``i`` on ``j`` in ``true_g``.

    ``Z`` must contain no descendant of a node on a causal path from i to j,
    and must d-separate i and j once the first edge of each such path is removed.
    """
    graph = true_g.to_networkx()
    on_path = causal_path_nodes(true_g, i, j)
    forbidden = set(on_path)
    for node in on_path:
        forbidden |= nx.descendants(graph, node)
    if Z & forbidden:
        return False
    graph.remove_edges_from([(i, c) for c in on_path if graph.has_edge(i, c)])
    return _d_separated(graph, i, j, Z)


def sid(true_g: Dag, pred_g: Dag) -> int:
    """Ordered pairs (i, j) whose effect is mis-identified by adjusting for PA_pred(i)."""
    _check_dims(true_g, pred_g)
    incorrect = 0
    for i in range(true_g.dim):
        Z = set(pred_g.parents(i))
        descendants = true_g.descendants(i)
        for j in range(true_g.dim):
            if j == i:
                continue
            if j in Z:
                # do(x_i) is predicted to leave a parent unchanged
                correct = j not in descendants
            else:
                correct = valid_adjustment(true_g, i, j, Z)
            incorrect += not correct
    return incorrect


# ============================================================================
# MARKOV EQUIVALENCE
# ============================================================================


def skeleton(g: Dag) -> set[frozenset[int]]:
    return {frozenset(edge) for edge in g.edges}


def v_structures(g: Dag) -> set[tuple[int, int, int]]:
    """Triples (a, c, b) with a -> c <- b, a < b and a, b non-adjacent."""
    adjacent = skeleton(g)
    found = set()
    for c in range(g.dim):
        parents = g.parents(c)
        for x, a in enumerate(parents):
            for b in parents[x + 1 :]:
                if frozenset((a, b)) not in adjacent:
                    found.add((a, c, b))
    return found


def markov_equivalent(g1: Dag, g2: Dag) -> bool:
    """Same skeleton and same v-structures."""
    _check_dims(g1, g2)
    return skeleton(g1) == skeleton(g2) and v_structures(g1) == v_structures(g2)
