"""Graph representations, acyclicity, enumeration and random sampling."""

from causal_cde.graphs.acyclicity import (
    acyclicity,
    acyclicity_tensor,
    is_acyclic,
    series_acyclicity,
    threshold_to_dag,
)
from causal_cde.graphs.dag import Dag, WeightedAdjacency, topological_order
from causal_cde.graphs.enumerate import (
    DEFAULT_ENUMERATION_CAP,
    distinct_structures,
    enumerate_dags,
)
from causal_cde.graphs.io import (
    ADJACENCY_HEADER,
    read_adjacency_csv,
    read_edge_list,
    write_adjacency_csv,
    write_edge_list,
)
from causal_cde.graphs.sampling import GraphScheme, sample_random_dag

__all__ = [
    "Dag",
    "WeightedAdjacency",
    "topological_order",
    "acyclicity",
    "acyclicity_tensor",
    "is_acyclic",
    "series_acyclicity",
    "threshold_to_dag",
    "DEFAULT_ENUMERATION_CAP",
    "enumerate_dags",
    "distinct_structures",
    "GraphScheme",
    "sample_random_dag",
    "ADJACENCY_HEADER",
    "read_adjacency_csv",
    "read_edge_list",
    "write_adjacency_csv",
    "write_edge_list",
]
