"""Result models returned by the discovery drivers."""

from __future__ import annotations

from enum import Enum
from typing import Any

import numpy as np
from pydantic import BaseModel, Field

from causal_cde.graphs import Dag, WeightedAdjacency


class Phase(str, Enum):
    """Phases of a continuous-relaxation run."""

    WARMUP = "warmup"
    CONSTRAINT = "constraint"
    COOLDOWN = "cooldown"


class RunStatus(str, Enum):
    """Outcome of one fallible unit (a restart or a graph fit)."""

    COMPLETED = "completed"
    FAILED = "failed"


class TraceRecord(BaseModel):
    """One sampled optimisation step."""

    phase: Phase
    step: int
    loss: float
    elbo: float
    h: float
    alpha: float
    rho: float


class DiscoveryResult(BaseModel):
    """Outcome of one seeded continuous-relaxation run."""

    seed: int
    status: RunStatus = RunStatus.COMPLETED
    dim: int
    adjacency: list[list[float]] = Field(default_factory=list)
    edges: list[tuple[int, int]] = Field(default_factory=list)
    final_elbo: float | None = None
    subproblems: int = 0
    h_history: list[float] = Field(default_factory=list)
    phase_boundaries: dict[str, int] = Field(default_factory=dict)
    trace: list[TraceRecord] = Field(default_factory=list)
    deviations: list[str] = Field(default_factory=list)
    error: str | None = None
    config: dict[str, Any] = Field(default_factory=dict)

    @property
    def succeeded(self) -> bool:
        return self.status is RunStatus.COMPLETED

    @property
    def dag(self) -> Dag:
        return Dag.from_edges(self.dim, self.edges)

    @property
    def weighted_adjacency(self) -> WeightedAdjacency:
        if not self.adjacency:
            return WeightedAdjacency.zeros(self.dim)
        return WeightedAdjacency(np.array(self.adjacency, dtype=np.float64))

    @classmethod
    def failed(
        cls, seed: int, dim: int, error: str, config: dict[str, Any] | None = None, **extra: Any
    ) -> DiscoveryResult:
        return cls(
            seed=seed,
            status=RunStatus.FAILED,
            dim=dim,
            adjacency=np.zeros((dim, dim)).tolist(),
            error=error,
            config=config or {},
            **extra,
        )

    def summary(self) -> dict[str, Any]:
        """Everything except the trace, for summary files and tables."""
        return self.model_dump(mode="json", exclude={"trace", "adjacency"})
