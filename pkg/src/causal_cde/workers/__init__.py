"""Parallel execution of independent fits."""

from causal_cde.workers.pool import PoolConfig, WorkerPool, WorkUnit, WorkUnitStatus

__all__ = ["PoolConfig", "WorkerPool", "WorkUnit", "WorkUnitStatus"]
