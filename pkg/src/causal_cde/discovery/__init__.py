"""Discovery drivers: continuous relaxation with restarts, and exhaustive enumeration."""

from causal_cde.discovery.continuous import (
    check_data,
    initial_alpha,
    subproblem_converged,
    train_continuous,
)
from causal_cde.discovery.discrete import (
    DiscreteFit,
    NodeFit,
    RankedGraph,
    fit_discrete,
    fit_discrete_detailed,
    fit_node,
    select_discrete,
)
from causal_cde.discovery.gradients import GradientCase, gradient_suite, random_problem
from causal_cde.discovery.model import (
    CgpCdeModel,
    LossTerms,
    adjacency_from_params,
    final_threshold,
    log_prior_theta,
    loss_breakdown,
    training_loss,
)
from causal_cde.discovery.restarts import run_restarts, select_best
from causal_cde.discovery.results import DiscoveryResult, Phase, RunStatus, TraceRecord

__all__ = [
    "check_data",
    "initial_alpha",
    "subproblem_converged",
    "train_continuous",
    "DiscreteFit",
    "NodeFit",
    "RankedGraph",
    "fit_discrete",
    "fit_discrete_detailed",
    "fit_node",
    "select_discrete",
    "GradientCase",
    "gradient_suite",
    "random_problem",
    "CgpCdeModel",
    "LossTerms",
    "adjacency_from_params",
    "final_threshold",
    "log_prior_theta",
    "loss_breakdown",
    "training_loss",
    "run_restarts",
    "select_best",
    "DiscoveryResult",
    "Phase",
    "RunStatus",
    "TraceRecord",
]
