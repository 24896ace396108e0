"""Logging configuration for causal-cde runs."""

from __future__ import annotations

import logging
import sys
from datetime import datetime
from pathlib import Path

LIBRARY_LOGGER = "causal_cde"


class DiscoveryLogger:
    """Run-scoped logger writing ``run_<id>.log`` into the run directory."""

    def __init__(
        self,
        logs_dir: Path,
        run_id: str | None = None,
        verbose: bool = False,
    ):
        self.logs_dir = logs_dir
        self.logs_dir.mkdir(parents=True, exist_ok=True)

        self.run_id = run_id or datetime.now().strftime("%Y%m%d_%H%M%S")
        self.verbose = verbose
        self.log_file = self.logs_dir / f"run_{self.run_id}.log"

        self.logger = logging.getLogger(f"causal-cde-{self.run_id}")
        self.logger.setLevel(logging.DEBUG if verbose else logging.INFO)
        self.logger.propagate = False
        for handler in list(self.logger.handlers):
            handler.close()
        self.logger.handlers = []

        # File handler - always log everything to file
        file_handler = logging.FileHandler(self.log_file)
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(
            logging.Formatter(
                "%(asctime)s | %(levelname)-8s | %(message)s", datefmt="%Y-%m-%d %H:%M:%S"
            )
        )
        self.logger.addHandler(file_handler)

        # Library modules log under "causal_cde.*"; route them into the same file
        self._library = logging.getLogger(LIBRARY_LOGGER)
        self._library.setLevel(logging.DEBUG if verbose else logging.INFO)
        self._library_handler = file_handler
        self._library.addHandler(file_handler)

        # Console handler - only if verbose
        if verbose:
            console_handler = logging.StreamHandler(sys.stderr)
            console_handler.setLevel(logging.DEBUG)
            console_handler.setFormatter(logging.Formatter("%(levelname)-8s | %(message)s"))
            self.logger.addHandler(console_handler)

    def info(self, message: str) -> None:
        self.logger.info(message)

    def debug(self, message: str) -> None:
        self.logger.debug(message)

    def warning(self, message: str) -> None:
        self.logger.warning(message)

    def error(self, message: str) -> None:
        self.logger.error(message)

    def section(self, title: str) -> None:
        """Log a section header."""
        self.logger.info("=" * 60)
        self.logger.info(title)
        self.logger.info("=" * 60)

    def dataset(self, source: str, n: int, d: int, standardized: bool) -> None:
        self.info(f"Dataset: {source} ({n} rows x {d} columns, standardized={standardized})")

    def restart_end(self, seed: int, status: str, elbo: float | None, edges: int) -> None:
        if elbo is None:
            self.warning(f"Restart {seed} {status}")
        else:
            self.info(f"Restart {seed} {status}: ELBO {elbo:.4f}, {edges} edges")
        self.info("-" * 60)

    def best_restart(self, seed: int, elbo: float) -> None:
        self.info(f"Best restart: seed {seed} (ELBO {elbo:.4f})")

    def graph_fit(self, index: int, total: int, edges: list[tuple[int, int]], elbo: float) -> None:
        self.debug(f"Graph {index + 1}/{total} {edges}: ELBO {elbo:.4f}")

    def metrics(self, shd: int, sid: int, f1: float) -> None:
        self.info(f"Metrics: SHD {shd}, SID {sid}, F1 {f1:.3f}")

    def artifact(self, path: Path) -> None:
        self.debug(f"Wrote {path}")

    def get_log_path(self) -> Path:
        return self.log_file

    def close(self) -> None:
        self._library.removeHandler(self._library_handler)
        for handler in list(self.logger.handlers):
            handler.close()
            self.logger.removeHandler(handler)


# Global logger instance
_logger: DiscoveryLogger | None = None


def get_logger() -> DiscoveryLogger | None:
    """Get the global logger instance."""
    return _logger


def init_logger(logs_dir: Path, run_id: str | None = None, verbose: bool = False) -> DiscoveryLogger:
    """Initialize and return a new run logger."""
    global _logger
    if _logger is not None:
        _logger.close()
    _logger = DiscoveryLogger(logs_dir, run_id, verbose)
    return _logger
