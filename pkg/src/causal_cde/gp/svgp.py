"""Sparse variational GP conditional density estimator (one node).

Each node models x_i = f_i(X_inputs, w_i) + eps with eps ~ N(0, phi^2), a GP
prior on f_i, M inducing points with a free Gaussian q(u) = N(m, L L^T) (not
whitened) and a per-point latent w_i ~ N(0, 1) whose posterior is produced by
an encoder network (continuous mode) or by free per-row parameters (discrete
mode).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.stats
import torch
from torch import nn

from causal_cde.errors import ContractViolation, NumericalError
from causal_cde.gp.kernels import (
    DTYPE,
    MODEL_KERNELS,
    STATIONARY_KERNELS,
    NodeKernelParams,
    eval_kernel,
    kernel_diag,
)
from causal_cde.gp.linalg import DEFAULT_JITTER, jitter_cholesky, tri_solve

LOG_2PI = math.log(2.0 * math.pi)
EXACT_GP_MAX_POINTS = 2000


def softplus_inverse(x: torch.Tensor | float) -> torch.Tensor:
    x = torch.as_tensor(x, dtype=DTYPE)
    return x + torch.log(-torch.expm1(-x))


# ============================================================================
# VARIATIONAL STATE
# ============================================================================


@dataclass
class VariationalGaussian:
    """q(u) = N(mean, cov_factor @ cov_factor.T) with a lower-triangular factor."""

    mean: torch.Tensor
    cov_factor: torch.Tensor

    def __post_init__(self) -> None:
        M = self.mean.shape[0]
        if self.cov_factor.shape != (M, M):
            raise ContractViolation(
                f"cov_factor shape {tuple(self.cov_factor.shape)} does not match mean length {M}"
            )
        if not torch.equal(self.cov_factor, torch.tril(self.cov_factor)):
            raise ContractViolation("cov_factor must be lower triangular")
        if bool((torch.diagonal(self.cov_factor) <= 0).any()):
            raise ContractViolation("cov_factor must have a positive diagonal")

    @property
    def size(self) -> int:
        return int(self.mean.shape[0])

    @property
    def covariance(self) -> torch.Tensor:
        return self.cov_factor @ self.cov_factor.T

    @classmethod
    def from_covariance(cls, mean: torch.Tensor, cov: torch.Tensor) -> VariationalGaussian:
        L, info = torch.linalg.cholesky_ex(0.5 * (cov + cov.T))
        if int(info) != 0:
            raise NumericalError("covariance is not positive definite", {"size": cov.shape[0]})
        return cls(mean.detach().clone(), L.detach().clone())


# ============================================================================
# LATENT POSTERIORS
# ============================================================================


class LatentEncoder(nn.Module):
    """MLP mapping a data row to the mean and log-variance of q(w_n)."""

    def __init__(
        self,
        input_dim: int,
        hidden: int = 128,
        layers: int = 5,
        rng: np.random.Generator | None = None,
    ):
        super().__init__()
        if layers < 1:
            raise ContractViolation(f"encoder needs at least one layer, got {layers}")
        widths = [input_dim] + [hidden] * (layers - 1) + [2]
        modules: list[nn.Module] = []
        for k, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
            modules.append(nn.Linear(fan_in, fan_out, dtype=DTYPE))
            if k < layers - 1:
                modules.append(nn.ReLU())
        self.net = nn.Sequential(*modules)
        self.hidden = hidden
        self.reset_parameters(rng or np.random.default_rng(0))

    def reset_parameters(self, rng: np.random.Generator) -> None:
        """Truncated normal weights (2 std cut-off) with std sqrt(2 / hidden), zero biases."""
        std = math.sqrt(2.0 / self.hidden)
        with torch.no_grad():
            for layer in self.net:
                if isinstance(layer, nn.Linear):
                    draws = scipy.stats.truncnorm.rvs(
                        -2.0, 2.0, scale=std, size=tuple(layer.weight.shape), random_state=rng
                    )
                    layer.weight.copy_(torch.as_tensor(draws, dtype=DTYPE))
                    layer.bias.zero_()

    def zero_(self) -> LatentEncoder:
        with torch.no_grad():
            for p in self.parameters():
                p.zero_()
        return self

    def forward(
        self, X_batch: torch.Tensor, index: torch.Tensor | None = None
    ) -> tuple[torch.Tensor, torch.Tensor]:
        out = self.net(X_batch)
        return out[:, 0], torch.exp(out[:, 1])


class FreeLatent(nn.Module):
    """Independent q(w_n) parameters for every training row (full-batch fits)."""

    def __init__(self, mean: torch.Tensor, var: torch.Tensor):
        super().__init__()
        self.mean = nn.Parameter(torch.as_tensor(mean, dtype=DTYPE).clone())
        self.raw_log_var = nn.Parameter(torch.log(torch.as_tensor(var, dtype=DTYPE)).clone())

    def forward(
        self, X_batch: torch.Tensor, index: torch.Tensor | None = None
    ) -> tuple[torch.Tensor, torch.Tensor]:
        if index is None:
            if X_batch.shape[0] != self.mean.shape[0]:
                raise ContractViolation("free latent parameters need the batch row indices")
            return self.mean, torch.exp(self.raw_log_var)
        return self.mean[index], torch.exp(self.raw_log_var[index])


def encode(
    encoder: nn.Module, X_batch: torch.Tensor, index: torch.Tensor | None = None
) -> tuple[torch.Tensor, torch.Tensor]:
    """Per-point latent Gaussian (mu, var); var is strictly positive."""
    X_batch = torch.as_tensor(X_batch, dtype=DTYPE)
    if not bool(torch.isfinite(X_batch).all()):
        raise NumericalError("encoder input contains non-finite values")
    mu, var = encoder(X_batch, index)
    if not (bool(torch.isfinite(mu).all()) and bool(torch.isfinite(var).all())):
        raise NumericalError(
            "encoder produced non-finite activations",
            {
                "batch": X_batch.shape[0],
                "mu_nan": int(torch.isnan(mu).sum()),
                "var_inf": int(torch.isinf(var).sum()),
            },
        )
    return mu, var


# ============================================================================
# NODE MODEL
# ============================================================================


class NodeModel(nn.Module):
    """GP-CDE for one variable: kernel, noise, inducing points, q(u) and q(w).

    ``input_cols`` are the observed columns feeding the GP; the latent input is
    always appended as the last kernel dimension. Kernel theta entries can be
    frozen at a fixed value; frozen entries take no gradient.
    """

    def __init__(
        self,
        target: int,
        input_cols: Sequence[int],
        num_inducing: int,
        latent: nn.Module,
        kernels: tuple[str, ...] = MODEL_KERNELS,
        jitter: float = DEFAULT_JITTER,
    ):
        super().__init__()
        if num_inducing < 1:
            raise ContractViolation(f"need at least one inducing point, got {num_inducing}")
        self.target = int(target)
        self.input_cols = [int(c) for c in input_cols]
        if self.target in self.input_cols:
            raise ContractViolation(f"target column {target} cannot be a GP input")
        self.kernels = tuple(kernels)
        self.jitter = jitter
        dim = len(self.input_cols) + 1

        self.raw_theta = nn.ParameterDict(
            {name: nn.Parameter(torch.zeros(dim, dtype=DTYPE)) for name in self.kernels}
        )
        self.raw_variance = nn.ParameterDict(
            {
                name: nn.Parameter(softplus_inverse(1.0).clone())
                for name in self.kernels
                if name in STATIONARY_KERNELS
            }
        )
        self.raw_rq_shape = nn.Parameter(softplus_inverse(1.0).clone())
        self.raw_noise = nn.Parameter(softplus_inverse(1.0).clone())
        self.inducing = nn.Parameter(torch.zeros(num_inducing, dim, dtype=DTYPE))
        self.q_mean = nn.Parameter(torch.zeros(num_inducing, dtype=DTYPE))
        self.q_sqrt = nn.Parameter(torch.eye(num_inducing, dtype=DTYPE))
        self.latent = latent

        self.frozen: dict[str, torch.Tensor] = {
            name: torch.zeros(dim, dtype=torch.bool) for name in self.kernels
        }
        self.frozen_values: dict[str, torch.Tensor] = {
            name: torch.zeros(dim, dtype=DTYPE) for name in self.kernels
        }

    # ------------------------------------------------------------------
    # Constrained views
    # ------------------------------------------------------------------

    @property
    def input_dim(self) -> int:
        return len(self.input_cols) + 1

    @property
    def latent_index(self) -> int:
        return self.input_dim - 1

    @property
    def num_inducing(self) -> int:
        return int(self.inducing.shape[0])

    @property
    def noise_var(self) -> torch.Tensor:
        return nn.functional.softplus(self.raw_noise)

    def theta(self, name: str) -> torch.Tensor:
        return torch.where(
            self.frozen[name],
            self.frozen_values[name],
            nn.functional.softplus(self.raw_theta[name]),
        )

    def kernel_params(self) -> NodeKernelParams:
        return NodeKernelParams(
            theta={name: self.theta(name) for name in self.kernels},
            variance={
                name: nn.functional.softplus(raw) for name, raw in self.raw_variance.items()
            },
            rq_shape=nn.functional.softplus(self.raw_rq_shape),
            enabled=self.kernels,
            latent_index=self.latent_index,
        )

    def q_u(self) -> VariationalGaussian:
        return VariationalGaussian(
            self.q_mean.detach().clone(), torch.tril(self.q_sqrt.detach()).clone()
        )

    @property
    def active_mask(self) -> torch.Tensor:
        """Per input dimension: True while at least one kernel's theta is not frozen."""
        frozen_all = torch.stack([self.frozen[name] for name in self.kernels]).all(dim=0)
        return ~frozen_all

    # ------------------------------------------------------------------
    # Setters
    # ------------------------------------------------------------------

    def set_theta(self, name: str, values: torch.Tensor | float) -> None:
        values = torch.as_tensor(values, dtype=DTYPE).expand(self.input_dim)
        with torch.no_grad():
            self.raw_theta[name].copy_(softplus_inverse(values))

    def set_variance(self, name: str, value: float) -> None:
        with torch.no_grad():
            self.raw_variance[name].copy_(softplus_inverse(value))

    def set_rq_shape(self, value: float) -> None:
        with torch.no_grad():
            self.raw_rq_shape.copy_(softplus_inverse(value))

    def set_noise_var(self, value: float) -> None:
        with torch.no_grad():
            self.raw_noise.copy_(softplus_inverse(value))

    def set_inducing(self, Z: torch.Tensor | np.ndarray) -> None:
        Z = torch.as_tensor(Z, dtype=DTYPE)
        if Z.shape != self.inducing.shape:
            raise ContractViolation(
                f"inducing inputs must have shape {tuple(self.inducing.shape)}, got {tuple(Z.shape)}"
            )
        with torch.no_grad():
            self.inducing.copy_(Z)

    def set_q_u(self, q: VariationalGaussian) -> None:
        if q.size != self.num_inducing:
            raise ContractViolation(f"q(u) has size {q.size}, expected {self.num_inducing}")
        with torch.no_grad():
            self.q_mean.copy_(q.mean)
            self.q_sqrt.copy_(q.cov_factor)

    def reset_q_to_prior(self) -> None:
        """Set q(u) = p(u) = N(0, K_uu + jitter I)."""
        with torch.no_grad():
            params = self.kernel_params()
            L = jitter_cholesky(eval_kernel(params, self.inducing, self.inducing), self.jitter)
            self.q_mean.zero_()
            self.q_sqrt.copy_(L)

    def freeze(self, name: str, dims: torch.Tensor, value: float) -> None:
        """Pin theta_name[dims] (a boolean mask) at ``value``."""
        dims = torch.as_tensor(dims, dtype=torch.bool)
        self.frozen[name] = self.frozen[name] | dims
        self.frozen_values[name] = torch.where(
            dims, torch.tensor(value, dtype=DTYPE), self.frozen_values[name]
        )

    def freeze_below(self, threshold: float, value: float) -> int:
        """Freeze every still-active theta entry under ``threshold``; returns how many."""
        count = 0
        with torch.no_grad():
            for name in self.kernels:
                below = (self.theta(name) < threshold) & ~self.frozen[name]
                count += int(below.sum())
                self.freeze(name, below, value)
        return count

    def freeze_input(self, dim: int, value: float) -> None:
        """Freeze every kernel's theta on one input dimension (removes that dependence)."""
        mask = torch.zeros(self.input_dim, dtype=torch.bool)
        mask[dim] = True
        for name in self.kernels:
            self.freeze(name, mask, value)

    # ------------------------------------------------------------------
    # Parameter groups
    # ------------------------------------------------------------------

    def hyperparameters(self) -> list[nn.Parameter]:
        """Everything Adam updates: all parameters except the variational q(u)."""
        return [p for name, p in self.named_parameters() if not name.startswith("q_")]

    def trainable_masks(self) -> list[torch.Tensor]:
        """Masks aligned with ``hyperparameters()``; False marks frozen theta entries."""
        masks = []
        for name, p in self.named_parameters():
            if name.startswith("q_"):
                continue
            if name.startswith("raw_theta."):
                masks.append(~self.frozen[name.split(".", 1)[1]])
            else:
                masks.append(torch.ones_like(p, dtype=torch.bool))
        return masks

    def forward(
        self,
        X_batch: torch.Tensor,
        mc_samples: int,
        dataset_size: int,
        eps: torch.Tensor | None = None,
        generator: torch.Generator | None = None,
        batch_index: torch.Tensor | None = None,
    ) -> torch.Tensor:
        return node_elbo(
            self,
            X_batch,
            self.target,
            mc_samples,
            dataset_size,
            generator,
            eps=eps,
            batch_index=batch_index,
        )


# ============================================================================
# BOUND COMPONENTS
# ============================================================================


def assemble_inputs(node: NodeModel, X_batch: torch.Tensor, w: torch.Tensor) -> torch.Tensor:
    """Stack (X_inputs, w_s) for every latent sample s: shape (S * b, input_dim)."""
    samples = w.shape[0]
    observed = X_batch[:, node.input_cols].repeat(samples, 1)
    return torch.cat([observed, w.reshape(-1, 1)], dim=1)


def _moments(
    params: NodeKernelParams,
    Z: torch.Tensor,
    L: torch.Tensor,
    inputs: torch.Tensor,
    q_mean: torch.Tensor,
    q_factor: torch.Tensor | None,
    q_cov: torch.Tensor | None,
) -> tuple[torch.Tensor, torch.Tensor]:
    Kuf = eval_kernel(params, Z, inputs)
    A = tri_solve(L, Kuf)
    B = tri_solve(L, A, transpose=True)
    fmean = B.T @ q_mean
    if q_cov is None:
        assert q_factor is not None
        s_term = ((q_factor.T @ B) ** 2).sum(dim=0)
    else:
        s_term = (B * (q_cov @ B)).sum(dim=0)
    fvar = kernel_diag(params, inputs) - (A**2).sum(dim=0) + s_term
    return fmean, torch.clamp(fvar, min=0.0)


def q_f_moments(
    node: NodeModel,
    inputs: torch.Tensor,
    q_mean: torch.Tensor | None = None,
    q_cov: torch.Tensor | None = None,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Marginals of q(f) = int p(f | u) q(u) du at ``inputs`` (b x input_dim)."""
    inputs = torch.as_tensor(inputs, dtype=DTYPE)
    params = node.kernel_params()
    L = jitter_cholesky(eval_kernel(params, node.inducing, node.inducing), node.jitter)
    mean = node.q_mean if q_mean is None else q_mean
    factor = torch.tril(node.q_sqrt) if q_cov is None else None
    return _moments(params, node.inducing, L, inputs, mean, factor, q_cov)


def _kl_u(
    L: torch.Tensor,
    q_mean: torch.Tensor,
    q_factor: torch.Tensor | None,
    q_cov: torch.Tensor | None,
) -> torch.Tensor:
    """KL[N(m, S) || N(0, L L^T)]."""
    M = q_mean.shape[0]
    alpha = tri_solve(L, q_mean.unsqueeze(1))
    if q_cov is None:
        assert q_factor is not None
        trace = (tri_solve(L, q_factor) ** 2).sum()
        logdet_s = 2.0 * torch.log(torch.diagonal(q_factor).abs()).sum()
    else:
        half = tri_solve(L, q_cov)
        trace = torch.diagonal(tri_solve(L, half.T)).sum()
        chol, info = torch.linalg.cholesky_ex(q_cov)
        if int(info) != 0:
            raise NumericalError("q(u) covariance is not positive definite", {"size": M})
        logdet_s = 2.0 * torch.log(torch.diagonal(chol)).sum()
    logdet_k = 2.0 * torch.log(torch.diagonal(L)).sum()
    return 0.5 * (trace + (alpha**2).sum() - M + logdet_k - logdet_s)


def kl_latent(mu: torch.Tensor, var: torch.Tensor) -> torch.Tensor:
    """sum_n KL[N(mu_n, var_n) || N(0, 1)]."""
    return 0.5 * (mu**2 + var - 1.0 - torch.log(var)).sum()


def kl_terms(
    node: NodeModel, mu: torch.Tensor, var: torch.Tensor
) -> tuple[torch.Tensor, torch.Tensor]:
    """(KL[q(u) || p(u)], sum_n KL[q(w_n) || p(w_n)])."""
    params = node.kernel_params()
    L = jitter_cholesky(eval_kernel(params, node.inducing, node.inducing), node.jitter)
    kl_u = _kl_u(L, node.q_mean, torch.tril(node.q_sqrt), None)
    return kl_u, kl_latent(mu, var)


def node_elbo(
    node: NodeModel,
    X_batch: torch.Tensor,
    target_col: int,
    mc_samples: int,
    dataset_size: int,
    rng: torch.Generator | None = None,
    *,
    eps: torch.Tensor | None = None,
    batch_index: torch.Tensor | None = None,
    q_mean: torch.Tensor | None = None,
    q_cov: torch.Tensor | None = None,
) -> torch.Tensor:
    """Monte-Carlo lower bound on log p(x_target) for one node.

    The Gaussian-likelihood expectation under q(f) is closed form; only the
    latent w is sampled. Minibatch terms are scaled by N / b, including the
    per-point latent KL. ``eps`` (mc_samples x b) fixes the latent draws.
    """
    X_batch = torch.as_tensor(X_batch, dtype=DTYPE)
    b = X_batch.shape[0]
    if b > dataset_size:
        raise ContractViolation(f"batch size {b} exceeds dataset size {dataset_size}")
    if target_col != node.target or target_col in node.input_cols:
        raise ContractViolation(f"column {target_col} is not this node's target")

    mu, var = encode(node.latent, X_batch, batch_index)
    if eps is None:
        eps = torch.randn(mc_samples, b, generator=rng, dtype=DTYPE)
    samples = eps.shape[0]
    w = mu.unsqueeze(0) + torch.sqrt(var).unsqueeze(0) * eps
    inputs = assemble_inputs(node, X_batch, w)

    params = node.kernel_params()
    L = jitter_cholesky(eval_kernel(params, node.inducing, node.inducing), node.jitter)
    mean = node.q_mean if q_mean is None else q_mean
    factor = torch.tril(node.q_sqrt) if q_cov is None else None
    fmean, fvar = _moments(params, node.inducing, L, inputs, mean, factor, q_cov)

    y = X_batch[:, target_col].repeat(samples)
    noise = node.noise_var
    expected_loglik = (
        -0.5 * LOG_2PI - 0.5 * torch.log(noise) - 0.5 * ((y - fmean) ** 2 + fvar) / noise
    ).sum() / samples

    scale = dataset_size / b
    elbo = scale * expected_loglik - _kl_u(L, mean, factor, q_cov) - scale * kl_latent(mu, var)
    if not bool(torch.isfinite(elbo)):
        raise NumericalError(
            "node bound is not finite",
            {"node": node.target, "noise_var": float(noise), "batch": b},
        )
    return elbo


def node_generator(base_seed: int, target: int) -> torch.Generator:
    """Per-node latent-sample stream; depends only on the base seed and the node."""
    return torch.Generator().manual_seed((base_seed + 1_000_003 * (target + 1)) % (2**63))


def model_elbo(
    nodes: Sequence[NodeModel],
    X_batch: torch.Tensor,
    N: int,
    mc_samples: int,
    rng: torch.Generator | int,
    batch_index: torch.Tensor | None = None,
) -> torch.Tensor:
    """Sum of node bounds over a shared batch.

    Each node draws its latent samples from ``node_generator(base, node.target)``,
    so the value does not depend on the order of ``nodes``.
    """
    if isinstance(rng, int):
        base = rng
    else:
        base = int(torch.randint(0, 2**62, (1,), generator=rng))
    total = torch.zeros((), dtype=DTYPE)
    for node in nodes:
        total = total + node_elbo(
            node,
            X_batch,
            node.target,
            mc_samples,
            N,
            node_generator(base, node.target),
            batch_index=batch_index,
        )
    return total


# ============================================================================
# ORACLES (no latent path)
# ============================================================================


def exact_gp_lml(
    kernel: NodeKernelParams,
    X: torch.Tensor | np.ndarray,
    y: torch.Tensor | np.ndarray,
    noise_var: float | torch.Tensor,
) -> torch.Tensor:
    """log N(y | 0, K + noise_var I) by dense Cholesky."""
    X = torch.as_tensor(X, dtype=DTYPE)
    y = torch.as_tensor(y, dtype=DTYPE)
    n = X.shape[0]
    if n > EXACT_GP_MAX_POINTS:
        raise ContractViolation(f"exact GP limited to {EXACT_GP_MAX_POINTS} points, got {n}")
    K = eval_kernel(kernel, X, X) + torch.as_tensor(noise_var, dtype=DTYPE) * torch.eye(
        n, dtype=DTYPE
    )
    L = jitter_cholesky(K, jitter=0.0)
    alpha = tri_solve(L, y.unsqueeze(1))
    return -0.5 * (alpha**2).sum() - torch.log(torch.diagonal(L)).sum() - 0.5 * n * LOG_2PI


def _collapsed_pieces(
    kernel: NodeKernelParams,
    Z: torch.Tensor,
    X: torch.Tensor,
    noise_var: torch.Tensor,
    jitter: float,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    Kuu = eval_kernel(kernel, Z, Z)
    L = jitter_cholesky(Kuu, jitter)
    A = tri_solve(L, eval_kernel(kernel, Z, X)) / torch.sqrt(noise_var)
    B = A @ A.T + torch.eye(Z.shape[0], dtype=DTYPE)
    LB = jitter_cholesky(B, jitter=0.0)
    return L, A, LB


def collapsed_bound_no_latent(
    kernel: NodeKernelParams,
    Z: torch.Tensor | np.ndarray,
    X: torch.Tensor | np.ndarray,
    y: torch.Tensor | np.ndarray,
    noise_var: float | torch.Tensor,
    jitter: float = DEFAULT_JITTER,
) -> torch.Tensor:
    """Sparse regression bound with q(u) optimised out:
    log N(y | 0, Q_ff + noise I) - tr(K_ff - Q_ff) / (2 noise)."""
    Z = torch.as_tensor(Z, dtype=DTYPE)
    X = torch.as_tensor(X, dtype=DTYPE)
    y = torch.as_tensor(y, dtype=DTYPE)
    if Z.shape[0] > X.shape[0]:
        raise ContractViolation(f"{Z.shape[0]} inducing points exceed {X.shape[0]} data points")
    noise = torch.as_tensor(noise_var, dtype=DTYPE)
    n = X.shape[0]
    _, A, LB = _collapsed_pieces(kernel, Z, X, noise, jitter)
    c = tri_solve(LB, A @ y.unsqueeze(1)) / torch.sqrt(noise)
    bound = -0.5 * n * LOG_2PI - torch.log(torch.diagonal(LB)).sum() - 0.5 * n * torch.log(noise)
    bound = bound - 0.5 * (y**2).sum() / noise + 0.5 * (c**2).sum()
    bound = bound - 0.5 * kernel_diag(kernel, X).sum() / noise + 0.5 * (A**2).sum()
    return bound


def optimal_q_u(
    kernel: NodeKernelParams,
    Z: torch.Tensor | np.ndarray,
    X: torch.Tensor | np.ndarray,
    y: torch.Tensor | np.ndarray,
    noise_var: float | torch.Tensor,
    jitter: float = DEFAULT_JITTER,
) -> VariationalGaussian:
    """The q(u) that attains the collapsed bound (Gaussian likelihood, no latent)."""
    Z = torch.as_tensor(Z, dtype=DTYPE)
    X = torch.as_tensor(X, dtype=DTYPE)
    y = torch.as_tensor(y, dtype=DTYPE)
    noise = torch.as_tensor(noise_var, dtype=DTYPE)
    with torch.no_grad():
        L, A, LB = _collapsed_pieces(kernel, Z, X, noise, jitter)
        # S = L B^-1 L^T, m = L B^-1 A y / sigma
        LB_inv_Lt = tri_solve(LB, L.T)
        S = LB_inv_Lt.T @ LB_inv_Lt
        rhs = tri_solve(LB, A @ y.unsqueeze(1))
        mean = (L @ tri_solve(LB, rhs, transpose=True)).squeeze(1) / torch.sqrt(noise)
    return VariationalGaussian.from_covariance(mean, S)
