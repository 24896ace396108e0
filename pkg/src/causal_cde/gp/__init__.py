"""Kernels and sparse variational Gaussian-process building blocks."""

from causal_cde.gp.kernels import (
    ALL_KERNELS,
    DTYPE,
    MODEL_KERNELS,
    STATIONARY_KERNELS,
    DependenceWeights,
    NodeKernelParams,
    dependence_weights,
    eval_kernel,
    kernel_diag,
)
from causal_cde.gp.linalg import DEFAULT_JITTER, jitter_cholesky
from causal_cde.gp.svgp import (
    FreeLatent,
    LatentEncoder,
    NodeModel,
    VariationalGaussian,
    collapsed_bound_no_latent,
    encode,
    exact_gp_lml,
    kl_terms,
    model_elbo,
    node_elbo,
    node_generator,
    optimal_q_u,
    q_f_moments,
    softplus_inverse,
)

__all__ = [
    "ALL_KERNELS",
    "DTYPE",
    "MODEL_KERNELS",
    "STATIONARY_KERNELS",
    "DependenceWeights",
    "NodeKernelParams",
    "dependence_weights",
    "eval_kernel",
    "kernel_diag",
    "DEFAULT_JITTER",
    "jitter_cholesky",
    "FreeLatent",
    "LatentEncoder",
    "NodeModel",
    "VariationalGaussian",
    "collapsed_bound_no_latent",
    "encode",
    "exact_gp_lml",
    "kl_terms",
    "model_elbo",
    "node_elbo",
    "node_generator",
    "optimal_q_u",
    "q_f_moments",
    "softplus_inverse",
]
