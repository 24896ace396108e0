"""Synthetic data generation and dataset handling."""

from causal_cde.datagen.dataset import Dataset, default_columns, standardize
from causal_cde.datagen.generators import (
    apply_nn_mechanism,
    draw_gp_mechanism,
    draw_nn_mechanism,
    generate,
    ground_truth_graph,
    sample_gpcde_dataset,
    sample_nn_scm,
)

__all__ = [
    "Dataset",
    "default_columns",
    "standardize",
    "apply_nn_mechanism",
    "draw_gp_mechanism",
    "draw_nn_mechanism",
    "generate",
    "ground_truth_graph",
    "sample_gpcde_dataset",
    "sample_nn_scm",
]
