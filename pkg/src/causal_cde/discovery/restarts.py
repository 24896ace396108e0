"""Seeded restarts of the continuous driver and best-restart selection."""

from __future__ import annotations

import logging
from typing import Callable, Sequence

import numpy as np

from causal_cde.config import TrainConfig
from causal_cde.discovery.continuous import check_data, train_continuous
from causal_cde.discovery.results import DiscoveryResult
from causal_cde.errors import AllRestartsFailed, ContractViolation
from causal_cde.workers import PoolConfig, WorkerPool, WorkUnit

logger = logging.getLogger("causal_cde.discovery")


def select_best(results: Sequence[DiscoveryResult]) -> DiscoveryResult:
    """Highest final ELBO among successful restarts; ties go to the smaller seed."""
    candidates = [r for r in results if r.succeeded and r.final_elbo is not None]
    if not candidates:
        raise AllRestartsFailed({r.seed: r.error or "no result" for r in results})
    return max(candidates, key=lambda r: (r.final_elbo, -r.seed))


def run_restarts(
    data: np.ndarray,
    config: TrainConfig,
    seeds: Sequence[int],
    workers: int = 1,
    on_result: Callable[[DiscoveryResult], None] | None = None,
) -> tuple[DiscoveryResult, list[DiscoveryResult]]:
    """Run ``train_continuous`` once per seed and pick the best bound.

    Results are returned in seed order. A restart that raises is recorded as a
    failed result; only when every restart fails is ``AllRestartsFailed`` raised.
    """
    if not seeds:
        raise ContractViolation("at least one seed is required")
    if len(set(seeds)) != len(seeds):
        raise ContractViolation(f"seeds must be unique, got {list(seeds)}")
    dim = check_data(data).shape[1]

    units = [
        WorkUnit(fn=lambda s=seed: train_continuous(data, config, s), id=f"seed-{seed}")
        for seed in seeds
    ]

    def collect(unit: WorkUnit[DiscoveryResult]) -> None:
        if on_result and unit.result is not None:
            on_result(unit.result)

    pool = WorkerPool(PoolConfig(max_workers=workers))
    done = pool.run(units, on_complete=collect)

    results: list[DiscoveryResult] = []
    for seed, unit in zip(seeds, done):
        if unit.result is not None:
            results.append(unit.result)
        else:
            result = DiscoveryResult.failed(
                seed, dim, unit.error or "unknown error", config.model_dump(mode="json")
            )
            if on_result:
                on_result(result)
            results.append(result)

    best = select_best(results)
    logger.info(f"best restart: seed {best.seed} with ELBO {best.final_elbo:.4f}")
    return best, results
