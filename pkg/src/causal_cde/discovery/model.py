"""The continuous-relaxation model: one GP-CDE per variable over all other variables.

Node i takes every column j != i plus its own latent variable as inputs. The
summed kernel hyperparameters of node i on input j form the weighted edge
j -> i, which is what the acyclicity penalty acts on.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np
import scipy.special
import torch
from torch import nn

from causal_cde.config import TrainConfig
from causal_cde.errors import ContractViolation, NumericalError
from causal_cde.gp import (
    DTYPE,
    MODEL_KERNELS,
    LatentEncoder,
    NodeModel,
    dependence_weights,
    node_elbo,
    node_generator,
    softplus_inverse,
)
from causal_cde.graphs import Dag, WeightedAdjacency, acyclicity_tensor
from causal_cde.optim import AugLagState

QOverride = tuple[torch.Tensor, torch.Tensor]


class LossTerms(NamedTuple):
    """The pieces of the training objective for one batch (all maximised)."""

    elbo: torch.Tensor
    log_prior: torch.Tensor
    h: torch.Tensor
    penalty: torch.Tensor
    loss: torch.Tensor


class CgpCdeModel(nn.Module):
    """D node models sharing one dataset; node i never sees column i as input."""

    def __init__(
        self,
        dim: int,
        num_inducing: int,
        encoder_hidden: int = 128,
        encoder_layers: int = 5,
        jitter: float = 1e-6,
        rng: np.random.Generator | None = None,
    ):
        super().__init__()
        if dim < 1:
            raise ContractViolation(f"need at least one variable, got {dim}")
        rng = rng or np.random.default_rng(0)
        self.dim = dim
        self.nodes = nn.ModuleList(
            [
                NodeModel(
                    target=i,
                    input_cols=[j for j in range(dim) if j != i],
                    num_inducing=num_inducing,
                    latent=LatentEncoder(dim, encoder_hidden, encoder_layers, rng),
                    kernels=MODEL_KERNELS,
                    jitter=jitter,
                )
                for i in range(dim)
            ]
        )
        self.initial_theta: list[dict[str, torch.Tensor]] = [
            {name: node.theta(name).detach().clone() for name in node.kernels}
            for node in self.nodes
        ]

    @classmethod
    def from_config(
        cls, X: np.ndarray, config: TrainConfig, rng: np.random.Generator
    ) -> CgpCdeModel:
        """Build and initialise a model for the N x D data matrix ``X``."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise ContractViolation(f"data must be a matrix, got shape {X.shape}")
        model = cls(
            dim=X.shape[1],
            num_inducing=min(config.num_inducing, X.shape[0]),
            encoder_hidden=config.encoder_hidden,
            encoder_layers=config.encoder_layers,
            jitter=config.jitter,
            rng=rng,
        )
        model.initialize(X, rng)
        return model

    def initialize(self, X: np.ndarray, rng: np.random.Generator) -> None:
        """Draw starting hyperparameters, inducing inputs and q(u) = p(u).

        theta ~ U(0.01, 1) except theta_lin = 0.25; all amplitudes 1; noise
        variance 1 / kappa^2 with kappa ~ U(50, 100); rq shape ~ U(0.1, 10).
        Inducing inputs are a random subset of data rows with a standard
        normal latent coordinate.
        """
        n = X.shape[0]
        for i, node in enumerate(self.nodes):
            for name in node.kernels:
                if name == "lin":
                    node.set_theta(name, 0.25)
                else:
                    node.set_theta(name, torch.as_tensor(rng.uniform(0.01, 1.0, node.input_dim)))
            for name in node.raw_variance:
                node.set_variance(name, 1.0)
            node.set_rq_shape(float(rng.uniform(0.1, 10.0)))
            node.set_noise_var(1.0 / float(rng.uniform(50.0, 100.0)) ** 2)

            rows = rng.choice(n, size=node.num_inducing, replace=False)
            latent = rng.standard_normal((node.num_inducing, 1))
            node.set_inducing(np.hstack([X[rows][:, node.input_cols], latent]))
            node.latent.reset_parameters(rng)
            node.reset_q_to_prior()
            self.initial_theta[i] = {
                name: node.theta(name).detach().clone() for name in node.kernels
            }

    # ------------------------------------------------------------------
    # Graph views
    # ------------------------------------------------------------------

    def adjacency_tensor(self) -> torch.Tensor:
        """Differentiable D x D weights, row = child, zero diagonal."""
        rows = []
        for i, node in enumerate(self.nodes):
            observed = dependence_weights(node.kernel_params()).observed
            zero = torch.zeros(1, dtype=DTYPE)
            rows.append(torch.cat([observed[:i], zero, observed[i:]]))
        return torch.stack(rows)

    def edge_activity(self) -> np.ndarray:
        """active[i, j]: some kernel's theta for input j of node i is still free."""
        active = np.zeros((self.dim, self.dim), dtype=bool)
        for i, node in enumerate(self.nodes):
            mask = node.active_mask.numpy()
            for k, j in enumerate(node.input_cols):
                active[i, j] = bool(mask[k])
        return active

    def theta_vector(self) -> torch.Tensor:
        """Every kernel's theta on every node, latent dimensions included."""
        return torch.cat([node.theta(name) for node in self.nodes for name in node.kernels])

    # ------------------------------------------------------------------
    # Parameter groups
    # ------------------------------------------------------------------

    def hyperparameters(self) -> list[nn.Parameter]:
        return [p for node in self.nodes for p in node.hyperparameters()]

    def trainable_masks(self) -> list[torch.Tensor]:
        return [m for node in self.nodes for m in node.trainable_masks()]

    def freeze_below(self, threshold: float, value: float) -> int:
        return sum(node.freeze_below(threshold, value) for node in self.nodes)

    def remove_edge(self, parent: int, child: int, value: float) -> None:
        """Freeze every theta component of input ``parent`` on node ``child``."""
        node = self.nodes[child]
        node.freeze_input(node.input_cols.index(parent), value)

    def restore_initial_theta(self, parent: int, child: int) -> None:
        """Reset the free theta components of edge parent -> child to their starting values."""
        node = self.nodes[child]
        k = node.input_cols.index(parent)
        with torch.no_grad():
            for name in node.kernels:
                if not bool(node.frozen[name][k]):
                    node.raw_theta[name][k] = softplus_inverse(self.initial_theta[child][name][k])


def adjacency_from_params(model: CgpCdeModel) -> WeightedAdjacency:
    """A_ij = summed theta of node i on input j; the latent input never appears."""
    with torch.no_grad():
        entries = model.adjacency_tensor().numpy().copy()
    return WeightedAdjacency(entries)


def log_prior_theta(
    theta: torch.Tensor | np.ndarray | Sequence[float],
    shape: float = 1.0,
    rate: float = 10.0,
) -> torch.Tensor | float:
    """Sum of Gamma(shape, rate) log densities.

    Returns a tensor for tensor input (so it can be differentiated) and a float
    otherwise.
    """
    as_tensor = isinstance(theta, torch.Tensor)
    values = torch.as_tensor(theta, dtype=DTYPE)
    if bool((values < 0).any()):
        raise ContractViolation("Gamma prior needs nonnegative theta")
    const = shape * math.log(rate) - float(scipy.special.gammaln(shape))
    log_density = -rate * values + const
    if shape != 1.0:
        log_density = log_density + (shape - 1.0) * torch.log(values)
    total = log_density.sum()
    return total if as_tensor else float(total)


def loss_breakdown(
    model: CgpCdeModel,
    X_batch: torch.Tensor,
    N: int,
    mc_samples: int,
    auglag: AugLagState | None,
    rng: torch.Generator | int,
    *,
    prior_shape: float = 1.0,
    prior_rate: float = 10.0,
    batch_index: torch.Tensor | None = None,
    q_overrides: Sequence[QOverride] | None = None,
) -> LossTerms:
    """ELBO + log p(theta) - alpha h^2 - (rho / 2) h.

    ``auglag=None`` switches the penalty off (h is still reported).
    ``q_overrides`` replaces each node's q(u) by a (mean, covariance) pair so
    that gradients with respect to them can be taken.
    """
    X_batch = torch.as_tensor(X_batch, dtype=DTYPE)
    if X_batch.shape[1] != model.dim:
        raise ContractViolation(f"batch has {X_batch.shape[1]} columns, model has {model.dim}")
    if isinstance(rng, int):
        base = rng
    else:
        base = int(torch.randint(0, 2**62, (1,), generator=rng))

    elbo = torch.zeros((), dtype=DTYPE)
    for k, node in enumerate(model.nodes):
        q_mean, q_cov = q_overrides[k] if q_overrides is not None else (None, None)
        elbo = elbo + node_elbo(
            node,
            X_batch,
            node.target,
            mc_samples,
            N,
            node_generator(base, node.target),
            batch_index=batch_index,
            q_mean=q_mean,
            q_cov=q_cov,
        )

    log_prior = log_prior_theta(model.theta_vector(), prior_shape, prior_rate)
    h = acyclicity_tensor(model.adjacency_tensor())
    if auglag is None:
        penalty = torch.zeros((), dtype=DTYPE)
    else:
        penalty = auglag.alpha * h**2 + 0.5 * auglag.rho * h
    loss = elbo + log_prior - penalty
    if not bool(torch.isfinite(loss)):
        raise NumericalError(
            "training objective is not finite",
            {"elbo": float(elbo), "h": float(h), "log_prior": float(log_prior)},
        )
    return LossTerms(elbo, log_prior, h, penalty, loss)


def training_loss(
    model: CgpCdeModel,
    X_batch: torch.Tensor,
    N: int,
    auglag: AugLagState | None,
    rng: torch.Generator | int,
    mc_samples: int = 100,
    **kwargs,
) -> torch.Tensor:
    """The single objective maximised in every phase."""
    return loss_breakdown(model, X_batch, N, mc_samples, auglag, rng, **kwargs).loss


def final_threshold(
    model: CgpCdeModel,
    dag: Dag,
    linvar_thresh: float = 1e-4,
    theta_thresh: float = 0.05,
) -> Dag:
    """Drop edge j -> i when theta_lin < linvar_thresh and the other theta sum < theta_thresh."""
    keep = []
    with torch.no_grad():
        for parent, child in dag.sorted_edges():
            node = model.nodes[child]
            k = node.input_cols.index(parent)
            linear = float(node.theta("lin")[k])
            others = sum(float(node.theta(name)[k]) for name in node.kernels if name != "lin")
            if linear < linvar_thresh and others < theta_thresh:
                continue
            keep.append((parent, child))
    return Dag.from_edges(dag.dim, keep)
