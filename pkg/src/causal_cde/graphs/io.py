"""Text formats for graphs: adjacency CSV and edge lists."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from causal_cde.errors import ContractViolation
from causal_cde.graphs.dag import Dag, WeightedAdjacency

ADJACENCY_HEADER = "# convention: row=child"


def format_adjacency(A: WeightedAdjacency) -> str:
    lines = [ADJACENCY_HEADER]
    for row in A.entries:
        lines.append(",".join(repr(float(value)) for value in row))
    return "\n".join(lines) + "\n"


def write_adjacency_csv(A: WeightedAdjacency, path: Path) -> None:
    path.write_text(format_adjacency(A))


def read_adjacency_csv(path: Path) -> WeightedAdjacency:
    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != ADJACENCY_HEADER:
        raise ContractViolation(
            f"{path}: missing '{ADJACENCY_HEADER}' header, refusing to guess the orientation"
        )
    rows = [[float(v) for v in line.split(",")] for line in lines[1:] if line.strip()]
    return WeightedAdjacency(np.array(rows, dtype=np.float64))


def format_edge_list(g: Dag) -> str:
    return "".join(f"{parent} {child}\n" for parent, child in g.sorted_edges())


def write_edge_list(g: Dag, path: Path) -> None:
    path.write_text(format_edge_list(g))


def read_edge_list(path: Path, dim: int) -> Dag:
    """Parse ``parent child`` lines (0-indexed). Blank lines and ``#`` comments are skipped."""
    edges = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ContractViolation(f"{path}:{lineno}: expected 'parent child', got {line!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return Dag.from_edges(dim, edges)


def infer_dim(*paths: Path) -> int:
    """Smallest dimension that covers every node mentioned in the edge lists."""
    highest = -1
    for path in paths:
        for line in path.read_text().splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                highest = max(highest, *(int(tok) for tok in line.split()))
    return highest + 1
