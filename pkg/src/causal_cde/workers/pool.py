"""Worker pool with configurable concurrency.

Runs independent work units (restart fits, per-graph fits, error-rate trials)
on a thread pool and hands the results back in submission order.
"""

from __future__ import annotations

import logging
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Any, Callable, Generic, Sequence, TypeVar

T = TypeVar("T")


class WorkUnitStatus(str, Enum):
    """Status of a work unit through its lifecycle."""

    PENDING = "pending"  # Queued, waiting to start
    RUNNING = "running"  # Currently executing
    COMPLETED = "completed"  # Finished successfully
    FAILED = "failed"  # Raised an exception


@dataclass
class WorkUnit(Generic[T]):
    """A single fallible computation, e.g. one seeded restart."""

    fn: Callable[[], T]
    id: str = ""
    status: WorkUnitStatus = WorkUnitStatus.PENDING
    result: T | None = None
    error: str | None = None
    exception: BaseException | None = None

    # Timing
    started_at: datetime | None = None
    completed_at: datetime | None = None

    def __post_init__(self) -> None:
        if not self.id:
            self.id = str(uuid.uuid4())[:12]

    @property
    def duration_seconds(self) -> float:
        if self.started_at is None or self.completed_at is None:
            return 0.0
        return (self.completed_at - self.started_at).total_seconds()

    def start(self) -> None:
        """Mark work unit as started."""
        self.status = WorkUnitStatus.RUNNING
        self.started_at = datetime.now()

    def complete(self, result: T) -> None:
        """Mark work unit as completed."""
        self.status = WorkUnitStatus.COMPLETED
        self.completed_at = datetime.now()
        self.result = result

    def fail(self, exc: BaseException) -> None:
        """Mark work unit as failed."""
        self.status = WorkUnitStatus.FAILED
        self.completed_at = datetime.now()
        self.exception = exc
        self.error = f"{type(exc).__name__}: {exc}"


@dataclass
class PoolConfig:
    """Configuration for the worker pool."""

    max_workers: int = 1  # 1 runs everything inline on the calling thread
    thread_name_prefix: str = "cde-worker"

    def __post_init__(self) -> None:
        if self.max_workers < 1:
            self.max_workers = 1


class WorkerPool:
    """Pool of workers for parallel execution.

    Features:
    - Inline execution when a single worker is configured
    - Per-unit status and timing
    - Completion callback on the coordinating thread
    - Metrics tracking
    """

    def __init__(
        self,
        config: PoolConfig | None = None,
        logger: logging.Logger | None = None,
    ):
        self.config = config or PoolConfig()
        self.logger = logger or logging.getLogger("causal_cde.workers")

        self._lock = threading.RLock()
        self._active_work_units: dict[str, WorkUnit[Any]] = {}

        # Metrics
        self._total_submitted = 0
        self._total_completed = 0
        self._total_failed = 0

    def _execute(self, work_unit: WorkUnit[T]) -> WorkUnit[T]:
        with self._lock:
            self._active_work_units[work_unit.id] = work_unit
        work_unit.start()
        try:
            work_unit.complete(work_unit.fn())
        except Exception as e:
            work_unit.fail(e)
            self.logger.error(f"Work unit {work_unit.id} failed: {work_unit.error}")
        with self._lock:
            self._active_work_units.pop(work_unit.id, None)
            if work_unit.status is WorkUnitStatus.COMPLETED:
                self._total_completed += 1
            else:
                self._total_failed += 1
        return work_unit

    def run(
        self,
        work_units: Sequence[WorkUnit[T]],
        on_complete: Callable[[WorkUnit[T]], None] | None = None,
    ) -> list[WorkUnit[T]]:
        """Execute every unit and return them in submission order.

        Exceptions raised by a unit are captured on the unit, never re-raised.
        ``on_complete`` runs on the calling thread as units finish.
        """
        units = list(work_units)
        with self._lock:
            self._total_submitted += len(units)
        self.logger.debug(f"Running {len(units)} work units on {self.config.max_workers} workers")

        if self.config.max_workers == 1 or len(units) <= 1:
            for unit in units:
                self._execute(unit)
                if on_complete:
                    on_complete(unit)
            return units

        with ThreadPoolExecutor(
            max_workers=self.config.max_workers,
            thread_name_prefix=self.config.thread_name_prefix,
        ) as executor:
            futures = [executor.submit(self._execute, unit) for unit in units]
            for future in as_completed(futures):
                unit = future.result()
                if on_complete:
                    on_complete(unit)
        return units

    def get_status(self) -> dict:
        """Get current pool status."""
        with self._lock:
            return {
                "max_workers": self.config.max_workers,
                "total_submitted": self._total_submitted,
                "total_completed": self._total_completed,
                "total_failed": self._total_failed,
                "active_work_units": list(self._active_work_units.keys()),
            }
