"""Additive kernel family with one dependence hyperparameter per input dimension.

Every kernel is a sum over input dimensions of a one-dimensional kernel, so a
dimension whose hyperparameters are all zero contributes a constant and the
Gram matrix no longer depends on that input. The last input dimension is the
node's latent variable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import torch

from causal_cde.errors import ContractViolation

DTYPE = torch.float64

MODEL_KERNELS: tuple[str, ...] = ("lin", "sqe", "m12", "m32", "rq")
STATIONARY_KERNELS: tuple[str, ...] = ("sqe", "m12", "m32", "m52", "rq")
ALL_KERNELS: tuple[str, ...] = MODEL_KERNELS + ("m52",)

_SQRT3 = math.sqrt(3.0)
_SQRT5 = math.sqrt(5.0)


@dataclass
class NodeKernelParams:
    """Constrained (post-softplus) kernel hyperparameters for one node.

    ``theta[name]`` is a length-``input_dim`` vector of dependence weights
    (precisions for the stationary kernels, slopes for ``lin``).
    ``variance[name]`` is the amplitude sigma^2 of each stationary kernel.
    ``enabled`` lists the kernels summed by ``eval_kernel(..., "sum")``.
    """

    theta: dict[str, torch.Tensor]
    variance: dict[str, torch.Tensor]
    rq_shape: torch.Tensor
    enabled: tuple[str, ...] = MODEL_KERNELS
    latent_index: int | None = field(default=None)

    def __post_init__(self) -> None:
        if self.latent_index is None:
            self.latent_index = self.input_dim - 1

    @property
    def input_dim(self) -> int:
        return int(next(iter(self.theta.values())).shape[0])

    @classmethod
    def constant(
        cls,
        input_dim: int,
        theta: float | dict[str, float] = 0.0,
        variance: float = 1.0,
        rq_shape: float = 1.0,
        enabled: tuple[str, ...] = MODEL_KERNELS,
    ) -> NodeKernelParams:
        """Parameters with every dimension set to the same value; convenient in tests."""
        values = theta if isinstance(theta, dict) else {name: theta for name in enabled}
        thetas = {
            name: torch.full((input_dim,), float(values.get(name, 0.0)), dtype=DTYPE)
            for name in enabled
        }
        variances = {
            name: torch.tensor(float(variance), dtype=DTYPE)
            for name in enabled
            if name in STATIONARY_KERNELS
        }
        return cls(thetas, variances, torch.tensor(float(rq_shape), dtype=DTYPE), enabled)

    def validate(self) -> None:
        dim = self.input_dim
        for name in self.enabled:
            if name not in ALL_KERNELS:
                raise ContractViolation(f"unknown kernel {name!r}")
            if name not in self.theta:
                raise ContractViolation(f"kernel {name!r} enabled without theta")
            if name in STATIONARY_KERNELS and name not in self.variance:
                raise ContractViolation(f"kernel {name!r} enabled without variance")
        for name, value in self.theta.items():
            if value.shape != (dim,):
                raise ContractViolation(
                    f"theta_{name} has shape {tuple(value.shape)}, expected ({dim},)"
                )
            if bool((value < 0).any()):
                raise ContractViolation(f"theta_{name} has negative entries")
        for name, value in self.variance.items():
            if bool(value < 0):
                raise ContractViolation(f"variance_{name} is negative")
        if "rq" in self.enabled and not bool(self.rq_shape > 0):
            raise ContractViolation("rq_shape must be positive")


class DependenceWeights(NamedTuple):
    """Summed theta over the model kernels, split into observed inputs and the latent input."""

    observed: torch.Tensor
    latent: torch.Tensor


def _as_points(points: torch.Tensor | np.ndarray) -> torch.Tensor:
    return torch.as_tensor(points, dtype=DTYPE)


def _one_dim(name: str, params: NodeKernelParams, diff: torch.Tensor, d: int) -> torch.Tensor:
    theta = params.theta[name][d]
    if name == "sqe":
        return torch.exp(-0.5 * theta**2 * diff**2)
    if name == "rq":
        a = params.rq_shape
        return (1.0 + theta**2 * diff**2 / (2.0 * a)) ** (-a)
    scaled = theta * diff.abs()
    if name == "m12":
        return torch.exp(-scaled)
    if name == "m32":
        return (1.0 + _SQRT3 * scaled) * torch.exp(-_SQRT3 * scaled)
    if name == "m52":
        return (1.0 + _SQRT5 * scaled + 5.0 / 3.0 * scaled**2) * torch.exp(-_SQRT5 * scaled)
    raise ContractViolation(f"unknown kernel {name!r}")


def _single(name: str, params: NodeKernelParams, U: torch.Tensor, V: torch.Tensor) -> torch.Tensor:
    if name not in params.theta:
        raise ContractViolation(f"kernel {name!r} has no parameters on this node")
    if name == "lin":
        return (U * params.theta["lin"]) @ V.T
    total = torch.zeros(U.shape[0], V.shape[0], dtype=DTYPE)
    for d in range(params.input_dim):
        diff = U[:, d : d + 1] - V[:, d].unsqueeze(0)
        total = total + _one_dim(name, params, diff, d)
    return params.variance[name] * total


def eval_kernel(
    params: NodeKernelParams,
    U: torch.Tensor | np.ndarray,
    V: torch.Tensor | np.ndarray,
    which: str = "sum",
) -> torch.Tensor:
    """Gram matrix k(U, V) of shape (n, m).

    ``which`` is ``"sum"`` (all enabled kernels) or a single kernel name from
    lin, sqe, m12, m32, m52, rq.
    """
    U = _as_points(U)
    V = _as_points(V)
    dim = params.input_dim
    if U.ndim != 2 or V.ndim != 2 or U.shape[1] != dim or V.shape[1] != dim:
        raise ContractViolation(
            f"points must have {dim} columns, got {tuple(U.shape)} and {tuple(V.shape)}"
        )
    params.validate()
    if which == "sum":
        names = params.enabled
    elif which in ALL_KERNELS:
        names = (which,)
    else:
        raise ContractViolation(f"unknown kernel selector {which!r}")
    total = torch.zeros(U.shape[0], V.shape[0], dtype=DTYPE)
    for name in names:
        total = total + _single(name, params, U, V)
    return total


def kernel_diag(params: NodeKernelParams, U: torch.Tensor) -> torch.Tensor:
    """diag k(U, U) without forming the full matrix."""
    U = _as_points(U)
    diag = torch.zeros(U.shape[0], dtype=DTYPE)
    for name in params.enabled:
        if name == "lin":
            diag = diag + (U**2 * params.theta["lin"]).sum(dim=1)
        else:
            # r = 0 in every dimension, so each summand equals the amplitude
            diag = diag + params.variance[name] * params.input_dim
    return diag


def dependence_weights(params: NodeKernelParams) -> DependenceWeights:
    """Elementwise sum of the model kernels' theta vectors.

    The latent input is reported separately and never reaches the adjacency.
    """
    total = torch.zeros(params.input_dim, dtype=DTYPE)
    for name in MODEL_KERNELS:
        if name in params.enabled:
            total = total + params.theta[name]
    latent = params.latent_index
    observed = torch.cat([total[:latent], total[latent + 1 :]])
    return DependenceWeights(observed=observed, latent=total[latent])
