"""Run directories and their artifacts."""

from causal_cde.storage.store import (
    ADJACENCY_FILE,
    CONFIG_FILE,
    EDGES_FILE,
    ERROR_RATE_FILE,
    MAP_EDGES_FILE,
    METRICS_FILE,
    RANKING_FILE,
    SUMMARY_FILE,
    TRACE_FILE,
    RunStore,
    format_edges,
    parse_edges,
)

__all__ = [
    "ADJACENCY_FILE",
    "CONFIG_FILE",
    "EDGES_FILE",
    "ERROR_RATE_FILE",
    "MAP_EDGES_FILE",
    "METRICS_FILE",
    "RANKING_FILE",
    "SUMMARY_FILE",
    "TRACE_FILE",
    "RunStore",
    "format_edges",
    "parse_edges",
]
