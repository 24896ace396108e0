"""Graph-comparison metrics."""

from causal_cde.metrics.report import (
    ErrorRateReport,
    MetricsReport,
    TrialRecord,
    evaluate_graphs,
)
from causal_cde.metrics.structural import (
    causal_path_nodes,
    d_separated,
    f1_score,
    markov_equivalent,
    precision_recall,
    shd,
    sid,
    skeleton,
    v_structures,
    valid_adjustment,
)

__all__ = [
    "ErrorRateReport",
    "MetricsReport",
    "TrialRecord",
    "evaluate_graphs",
    "causal_path_nodes",
    "d_separated",
    "f1_score",
    "markov_equivalent",
    "precision_recall",
    "shd",
    "sid",
    "skeleton",
    "v_structures",
    "valid_adjustment",
]
