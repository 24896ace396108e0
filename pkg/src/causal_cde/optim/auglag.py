"""Augmented-Lagrangian coefficient schedule for the acyclicity constraint."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from causal_cde.errors import ContractViolation


@dataclass(frozen=True)
class AugLagState:
    """Penalty coefficients of the current constrained subproblem.

    ``alpha`` multiplies |h|^2 and ``rho`` / 2 multiplies h in the loss.
    """

    subproblem_index: int = 0
    alpha: float = 1.0
    rho: float = 0.0
    h_prev: float = math.inf

    def penalty(self, h: float) -> float:
        return self.alpha * h * h + 0.5 * self.rho * h


def auglag_update(
    state: AugLagState,
    h_current: float,
    nu: float = 10.0,
    gamma: float = 0.9,
) -> AugLagState:
    """Close one subproblem: rho += alpha * h; alpha *= nu if h > gamma * h_prev."""
    if h_current < 0 or math.isnan(h_current):
        raise ContractViolation(f"acyclicity must be nonnegative, got {h_current}")
    alpha = state.alpha * nu if h_current > gamma * state.h_prev else state.alpha
    return replace(
        state,
        subproblem_index=state.subproblem_index + 1,
        alpha=alpha,
        rho=state.rho + state.alpha * h_current,
        h_prev=h_current,
    )
