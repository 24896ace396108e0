"""Finite-difference checks of the node bound and the training objective on small random problems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from causal_cde.datagen import standardize
from causal_cde.discovery.model import CgpCdeModel, training_loss
from causal_cde.gp import DTYPE, node_elbo
from causal_cde.optim import AugLagState, GradCheckReport, flatten_objective, grad_check

SUITE_ENCODER_HIDDEN = 8
SUITE_ENCODER_LAYERS = 2


@dataclass
class GradientCase:
    """One objective checked at one random parameterization."""

    trial: int
    objective: str
    report: GradCheckReport

    @property
    def passed(self) -> bool:
        return self.report.passed


def random_problem(
    n: int, dim: int, num_inducing: int, seed: int
) -> tuple[CgpCdeModel, torch.Tensor]:
    """Standardized Gaussian data and a model with randomised, well-scaled parameters.

    Noise variances are drawn from U(0.1, 1) and q(u) means are perturbed away
    from the prior so that every parameter has a non-trivial gradient.
    """
    rng = np.random.default_rng(seed)
    X = standardize(rng.standard_normal((n, dim))).values
    model = CgpCdeModel(
        dim,
        min(num_inducing, n),
        encoder_hidden=SUITE_ENCODER_HIDDEN,
        encoder_layers=SUITE_ENCODER_LAYERS,
        rng=rng,
    )
    model.initialize(X, rng)
    with torch.no_grad():
        for node in model.nodes:
            node.set_noise_var(float(rng.uniform(0.1, 1.0)))
            node.q_mean.add_(torch.as_tensor(0.1 * rng.standard_normal(node.num_inducing)))
    return model, torch.as_tensor(X, dtype=DTYPE)


def gradient_suite(
    n: int = 32,
    dim: int = 2,
    num_inducing: int = 8,
    mc_samples: int = 8,
    trials: int = 20,
    seed: int = 0,
    tol: float = 1e-4,
) -> list[GradientCase]:
    """Check node_elbo and training_loss gradients against central differences.

    Latent draws are frozen per trial so both objectives are deterministic
    functions of the parameters.
    """
    cases = []
    for trial in range(trials):
        model, X = random_problem(n, dim, num_inducing, seed + trial)

        node = model.nodes[0]
        generator = torch.Generator().manual_seed(seed + trial)
        eps = torch.randn(mc_samples, n, generator=generator, dtype=DTYPE)
        objective, x0 = flatten_objective(
            node, lambda node=node: node_elbo(node, X, node.target, mc_samples, n, eps=eps)
        )
        cases.append(GradientCase(trial, "node_elbo", grad_check(objective, x0, tol=tol)))

        auglag = AugLagState(alpha=1.0 + trial, rho=0.5 * trial)
        objective, x0 = flatten_objective(
            model,
            lambda: training_loss(model, X, n, auglag, seed + trial, mc_samples=mc_samples),
        )
        cases.append(GradientCase(trial, "training_loss", grad_check(objective, x0, tol=tol)))
    return cases
