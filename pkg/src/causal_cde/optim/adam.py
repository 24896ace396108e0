"""Functional Adam for gradient *ascent* with optional per-entry freeze masks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import torch

from causal_cde.errors import NumericalError


@dataclass
class AdamState:
    """Moment accumulators and step counter for one training run."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: list[torch.Tensor] = field(default_factory=list)
    second_moment: list[torch.Tensor] = field(default_factory=list)

    @classmethod
    def for_params(
        cls,
        params: Sequence[torch.Tensor],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> AdamState:
        return cls(
            lr=lr,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
            first_moment=[torch.zeros_like(p) for p in params],
            second_moment=[torch.zeros_like(p) for p in params],
        )


def adam_step(
    state: AdamState,
    params: Sequence[torch.Tensor],
    grads: Sequence[torch.Tensor | None],
    masks: Sequence[torch.Tensor] | None = None,
) -> AdamState:
    """One bias-corrected Adam step that *increases* the objective.

    Parameters are updated in place. Entries whose mask is False keep their
    value and have their moments reset, so they never move.
    """
    if len(params) != len(state.first_moment):
        raise ValueError(
            f"optimizer state tracks {len(state.first_moment)} tensors, got {len(params)}"
        )
    state.step += 1
    correction1 = 1.0 - state.beta1**state.step
    correction2 = 1.0 - state.beta2**state.step
    with torch.no_grad():
        for k, (param, grad) in enumerate(zip(params, grads)):
            if grad is None:
                continue
            if grad.shape != param.shape:
                raise ValueError(f"gradient {k} has shape {tuple(grad.shape)}, expected {tuple(param.shape)}")
            if not bool(torch.isfinite(grad).all()):
                raise NumericalError("non-finite gradient", {"tensor": k, "step": state.step})
            m = state.first_moment[k]
            v = state.second_moment[k]
            m.mul_(state.beta1).add_(grad, alpha=1.0 - state.beta1)
            v.mul_(state.beta2).addcmul_(grad, grad, value=1.0 - state.beta2)
            update = state.lr * (m / correction1) / (torch.sqrt(v / correction2) + state.eps)
            if masks is not None:
                keep = masks[k]
                update = torch.where(keep, update, torch.zeros_like(update))
                m.masked_fill_(~keep, 0.0)
                v.masked_fill_(~keep, 0.0)
            param.add_(update)
    return state
