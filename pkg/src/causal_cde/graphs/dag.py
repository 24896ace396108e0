"""Graph representations: weighted adjacency matrices and exact DAGs.

Internally, entry (i, j) of every matrix means the edge j -> i ("row = child").
Dag edge sets are stored as (parent, child) pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import networkx as nx
import numpy as np

from causal_cde.errors import ContractViolation


@dataclass
class WeightedAdjacency:
    """Nonnegative D x D dependence weights with a zero diagonal.

    ``entries[i, j]`` is the weight of variable j as an input to variable i,
    i.e. the strength of the candidate edge j -> i.
    """

    entries: np.ndarray

    def __post_init__(self) -> None:
        entries = np.asarray(self.entries, dtype=np.float64)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ContractViolation(f"adjacency must be square, got shape {entries.shape}")
        if not np.all(np.isfinite(entries)):
            raise ContractViolation("adjacency has non-finite entries")
        if np.any(entries < 0):
            raise ContractViolation("adjacency has negative entries")
        if np.any(np.diag(entries) != 0):
            raise ContractViolation("adjacency diagonal must be identically zero")
        self.entries = entries

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])

    @classmethod
    def zeros(cls, dim: int) -> WeightedAdjacency:
        return cls(np.zeros((dim, dim)))

    def copy(self) -> WeightedAdjacency:
        return WeightedAdjacency(self.entries.copy())

    def support_graph(self, tol: float = 0.0) -> nx.DiGraph:
        """Directed graph on edges {(j, i): A_ij > tol}; may contain cycles."""
        children, parents = np.nonzero(self.entries > tol)
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.dim))
        graph.add_edges_from(zip(parents.tolist(), children.tolist()))
        return graph


@dataclass(frozen=True)
class Dag:
    """Binary directed acyclic graph over nodes 0..dim-1."""

    dim: int
    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ContractViolation(f"graph dimension must be positive, got {self.dim}")
        object.__setattr__(self, "edges", frozenset((int(p), int(c)) for p, c in self.edges))
        for parent, child in self.edges:
            if not (0 <= parent < self.dim and 0 <= child < self.dim):
                raise ContractViolation(f"edge {parent}->{child} out of range for dim {self.dim}")
            if parent == child:
                raise ContractViolation(f"self-edge on node {parent}")
        if not nx.is_directed_acyclic_graph(self.to_networkx()):
            raise ContractViolation(f"edge set {sorted(self.edges)} contains a directed cycle")

    # ------------------------------------------------------------------
    # Construction
    # ------------------------------------------------------------------

    @classmethod
    def empty(cls, dim: int) -> Dag:
        return cls(dim)

    @classmethod
    def from_edges(cls, dim: int, edges: Iterable[tuple[int, int]]) -> Dag:
        return cls(dim, frozenset(edges))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, tol: float = 0.0) -> Dag:
        """Build from a row=child matrix, keeping entries strictly above ``tol``."""
        matrix = np.asarray(matrix)
        children, parents = np.nonzero(matrix > tol)
        return cls(int(matrix.shape[0]), frozenset(zip(parents.tolist(), children.tolist())))

    # ------------------------------------------------------------------
    # Access
    # ------------------------------------------------------------------

    def parents(self, node: int) -> list[int]:
        return sorted(p for p, c in self.edges if c == node)

    def children(self, node: int) -> list[int]:
        return sorted(c for p, c in self.edges if p == node)

    def descendants(self, node: int) -> set[int]:
        """Strict descendants of ``node``."""
        return set(nx.descendants(self.to_networkx(), node))

    def ancestors(self, node: int) -> set[int]:
        """Strict ancestors of ``node``."""
        return set(nx.ancestors(self.to_networkx(), node))

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def to_matrix(self) -> np.ndarray:
        """Binary row=child matrix: ``M[c, p] = 1`` for every edge p -> c."""
        matrix = np.zeros((self.dim, self.dim), dtype=np.int64)
        for parent, child in self.edges:
            matrix[child, parent] = 1
        return matrix

    def to_networkx(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.dim))
        graph.add_edges_from(self.edges)
        return graph

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def relabel(self, permutation: Iterable[int]) -> Dag:
        """Return the graph with node k renamed to ``permutation[k]``."""
        perm = list(permutation)
        return Dag(self.dim, frozenset((perm[p], perm[c]) for p, c in self.edges))

    def __str__(self) -> str:
        if not self.edges:
            return f"Dag(dim={self.dim}, empty)"
        body = ", ".join(f"{p}->{c}" for p, c in self.sorted_edges())
        return f"Dag(dim={self.dim}, {body})"


def topological_order(g: Dag) -> list[int]:
    """A permutation of 0..D-1 in which every parent precedes its children.

    Ties are broken by node index, so the empty graph yields the identity.
    """
    return list(nx.lexicographical_topological_sort(g.to_networkx()))
