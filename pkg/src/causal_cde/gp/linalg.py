"""Cholesky factorization with bounded jitter escalation."""

from __future__ import annotations

import logging

import torch

from causal_cde.errors import NumericalError

logger = logging.getLogger("causal_cde.gp")

DEFAULT_JITTER = 1e-6
DEFAULT_ESCALATIONS = 3


def jitter_cholesky(
    K: torch.Tensor,
    jitter: float = DEFAULT_JITTER,
    escalations: int = DEFAULT_ESCALATIONS,
) -> torch.Tensor:
    """Lower Cholesky factor of ``K + jitter * I``.

    On failure the jitter is multiplied by 10, at most ``escalations`` times.
    A zero base jitter escalates from 1e-10.
    """
    eye = torch.eye(K.shape[0], dtype=K.dtype)
    current = jitter
    for attempt in range(escalations + 1):
        L, info = torch.linalg.cholesky_ex(K + current * eye)
        if int(info) == 0:
            if attempt:
                logger.debug("cholesky succeeded with jitter %.1e", current)
            return L
        last = current
        current = current * 10.0 if current > 0 else 1e-10
    diag = torch.diagonal(K).detach()
    raise NumericalError(
        "Cholesky factorization failed after jitter escalation",
        {
            "size": K.shape[0],
            "final_jitter": last,
            "min_diag": float(diag.min()) if diag.numel() else 0.0,
            "finite": bool(torch.isfinite(K).all()),
        },
    )


def tri_solve(L: torch.Tensor, B: torch.Tensor, transpose: bool = False) -> torch.Tensor:
    """Solve ``L X = B`` (or ``L^T X = B``) for lower-triangular ``L``."""
    if transpose:
        return torch.linalg.solve_triangular(L.T, B, upper=True)
    return torch.linalg.solve_triangular(L, B, upper=False)
