"""causal-cde: causal discovery with Gaussian-process conditional density estimators."""

__version__ = "0.1.0"

from causal_cde.config import RunConfig, TrainConfig, load_config
from causal_cde.errors import (
    AllRestartsFailed,
    CausalCdeError,
    ConfigError,
    ContractViolation,
    EnumerationCapError,
    NumericalError,
)
from causal_cde.graphs import Dag, WeightedAdjacency

__all__ = [
    "__version__",
    "RunConfig",
    "TrainConfig",
    "load_config",
    "Dag",
    "WeightedAdjacency",
    "CausalCdeError",
    "ContractViolation",
    "NumericalError",
    "EnumerationCapError",
    "ConfigError",
    "AllRestartsFailed",
]
