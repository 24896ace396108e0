"""Optimizers: Adam, natural gradients, augmented Lagrangian schedule, gradient checks."""

from causal_cde.optim.adam import AdamState, adam_step
from causal_cde.optim.auglag import AugLagState, auglag_update
from causal_cde.optim.gradcheck import GradCheckReport, flatten_objective, grad_check
from causal_cde.optim.natgrad import ExpectationGrads, expectation_grads, natgrad_step

__all__ = [
    "AdamState",
    "adam_step",
    "AugLagState",
    "auglag_update",
    "GradCheckReport",
    "grad_check",
    "flatten_objective",
    "ExpectationGrads",
    "expectation_grads",
    "natgrad_step",
]
