"""Central finite-difference checks of autograd gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import torch
from torch import nn

from causal_cde.gp.kernels import DTYPE

Objective = Callable[[torch.Tensor], torch.Tensor]


@dataclass
class GradCheckReport:
    """Per-parameter comparison of analytic and finite-difference gradients.

    An entry fails when its relative error exceeds ``tol`` and its absolute
    error exceeds ``atol``.
    """

    analytic: np.ndarray
    numeric: np.ndarray
    abs_errors: np.ndarray
    rel_errors: np.ndarray
    tol: float
    atol: float

    @property
    def max_abs_error(self) -> float:
        return float(self.abs_errors.max(initial=0.0))

    @property
    def max_rel_error(self) -> float:
        return float(self.rel_errors.max(initial=0.0))

    @property
    def _excess(self) -> np.ndarray:
        return np.minimum(self.rel_errors / self.tol, self.abs_errors / self.atol)

    @property
    def worst_index(self) -> int:
        return int(np.argmax(self._excess)) if self.rel_errors.size else -1

    @property
    def passed(self) -> bool:
        return not self.failing_indices()

    def failing_indices(self) -> list[int]:
        return np.nonzero(self._excess > 1.0)[0].tolist()

    def to_dict(self) -> dict:
        return {
            "parameters": int(self.rel_errors.size),
            "max_abs_error": self.max_abs_error,
            "max_rel_error": self.max_rel_error,
            "worst_index": self.worst_index,
            "tol": self.tol,
            "atol": self.atol,
            "passed": self.passed,
        }


def grad_check(
    objective: Objective,
    params: torch.Tensor | np.ndarray,
    tol: float = 1e-4,
    step: float = 1e-5,
    gradient: Callable[[torch.Tensor], torch.Tensor] | None = None,
    atol: float = 1e-7,
) -> GradCheckReport:
    """Compare the gradient of ``objective`` at a flat parameter vector with
    central differences.

    The analytic gradient comes from autograd unless ``gradient`` is given.
    Relative error is |a - n| / max(|a|, |n|, 1e-12); ``atol`` only covers
    gradients that are zero up to finite-difference round-off.
    """
    x0 = torch.as_tensor(params, dtype=DTYPE).detach().clone().reshape(-1)

    if gradient is None:
        x = x0.clone().requires_grad_(True)
        value = objective(x)
        (analytic,) = torch.autograd.grad(value, x)
    else:
        analytic = gradient(x0.clone())
    analytic_np = analytic.detach().reshape(-1).numpy().astype(np.float64)

    numeric = np.zeros_like(analytic_np)
    with torch.no_grad():
        for k in range(x0.numel()):
            plus = x0.clone()
            plus[k] += step
            minus = x0.clone()
            minus[k] -= step
            numeric[k] = float(objective(plus) - objective(minus)) / (2.0 * step)

    abs_err = np.abs(analytic_np - numeric)
    rel = abs_err / np.maximum(np.maximum(np.abs(analytic_np), np.abs(numeric)), 1e-12)
    return GradCheckReport(analytic_np, numeric, abs_err, rel, tol, atol)


class _Bound(nn.Module):
    def __init__(self, module: nn.Module, fn: Callable[[], torch.Tensor]):
        super().__init__()
        self.module = module
        self.fn = fn

    def forward(self) -> torch.Tensor:
        return self.fn()


def flatten_objective(
    module: nn.Module,
    fn: Callable[[], torch.Tensor],
    names: Sequence[str] | None = None,
) -> tuple[Objective, torch.Tensor]:
    """Expose ``fn``, which reads ``module``'s parameters, as a function of one flat vector.

    Returns the objective and the current parameter values flattened in
    ``names`` order (all named parameters by default).
    """
    params = dict(module.named_parameters())
    names = list(names) if names is not None else list(params)
    shapes = [params[n].shape for n in names]
    sizes = [params[n].numel() for n in names]
    x0 = torch.cat([params[n].detach().reshape(-1) for n in names]).to(DTYPE)
    bound = _Bound(module, fn)

    def objective(x: torch.Tensor) -> torch.Tensor:
        chunks = torch.split(x, sizes)
        swapped = {f"module.{n}": c.reshape(s) for n, c, s in zip(names, chunks, shapes)}
        return torch.func.functional_call(bound, swapped, ())

    return objective, x0
