"""Natural-gradient updates for the Gaussian variational state q(u).

For q = N(m, S) the natural parameters are (S^-1 m, -S^-1 / 2) and the
expectation parameters are (m, S + m m^T). The natural gradient with respect
to the natural parameters equals the ordinary gradient with respect to the
expectation parameters, so one ascent step is

    theta <- theta + step * dL/deta.
"""

from __future__ import annotations

import logging
from typing import NamedTuple

import torch

from causal_cde.errors import NumericalError
from causal_cde.gp.svgp import VariationalGaussian

logger = logging.getLogger("causal_cde.optim")

MAX_HALVINGS = 5


class ExpectationGrads(NamedTuple):
    """dL/d(eta1, eta2) with eta1 = m and eta2 = S + m m^T."""

    d_eta1: torch.Tensor
    d_eta2: torch.Tensor


def expectation_grads(
    grad_mean: torch.Tensor, grad_cov: torch.Tensor, mean: torch.Tensor
) -> ExpectationGrads:
    """Chain rule from (dL/dm, dL/dS) to the expectation parameterisation."""
    g_cov = 0.5 * (grad_cov + grad_cov.T)
    return ExpectationGrads(grad_mean - 2.0 * g_cov @ mean, g_cov)


def natgrad_step(
    q: VariationalGaussian,
    grads: ExpectationGrads,
    step: float,
    max_halvings: int = MAX_HALVINGS,
) -> VariationalGaussian:
    """One natural-gradient ascent step.

    If the proposed covariance is not positive definite the step is halved,
    up to ``max_halvings`` times.
    """
    if step == 0.0:
        return VariationalGaussian(q.mean.clone(), q.cov_factor.clone())

    with torch.no_grad():
        eye = torch.eye(q.size, dtype=q.mean.dtype)
        precision_factor_inv = torch.linalg.solve_triangular(q.cov_factor, eye, upper=False)
        precision = precision_factor_inv.T @ precision_factor_inv
        theta1 = precision @ q.mean
        theta2 = -0.5 * precision

        current = step
        for attempt in range(max_halvings + 1):
            new_theta1 = theta1 + current * grads.d_eta1
            new_theta2 = theta2 + current * grads.d_eta2
            new_precision = -2.0 * new_theta2
            new_precision = 0.5 * (new_precision + new_precision.T)
            chol_precision, info = torch.linalg.cholesky_ex(new_precision)
            if int(info) == 0:
                # S = P^-1 = (C C^T)^-1; factor it directly from C
                inv_chol = torch.linalg.solve_triangular(chol_precision, eye, upper=False)
                cov = inv_chol.T @ inv_chol
                mean = torch.cholesky_solve(new_theta1.unsqueeze(1), chol_precision).squeeze(1)
                cov_factor, info = torch.linalg.cholesky_ex(0.5 * (cov + cov.T))
                if int(info) == 0:
                    if attempt:
                        logger.debug("natural-gradient step accepted at %.3g", current)
                    return VariationalGaussian(mean, cov_factor)
            current *= 0.5

    raise NumericalError(
        "natural-gradient step keeps producing a non positive-definite covariance",
        {"initial_step": step, "halvings": max_halvings},
    )
