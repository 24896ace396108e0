"""Pipelines behind the CLI: discover, enumerate and error-rate runs."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from typing import Callable

import numpy as np
import torch
from rich.console import Console
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn

from causal_cde.config import GeneratorKind, Mode, RunConfig
from causal_cde.datagen import Dataset, generate, sample_gpcde_dataset, standardize
from causal_cde.discovery import DiscoveryResult, RankedGraph, run_restarts, select_discrete
from causal_cde.errors import AllRestartsFailed, ConfigError, NumericalError
from causal_cde.graphs import Dag, distinct_structures, write_edge_list
from causal_cde.logging import DiscoveryLogger, init_logger
from causal_cde.metrics import ErrorRateReport, MetricsReport, TrialRecord, evaluate_graphs
from causal_cde.storage import RunStore

console = Console()

DATA_FILE = "data.csv"
TRUE_EDGES_FILE = "true_edges.txt"


@dataclass
class LoadedData:
    """Standardized data plus the ground truth when the data was generated."""

    dataset: Dataset
    truth: Dag | None


class DiscoveryHarness:
    """Main orchestrator for one run directory."""

    def __init__(self, config: RunConfig, verbose: bool = False, run_id: str | None = None):
        self.config = config
        self.store = RunStore(config.output_dir)
        self.logger: DiscoveryLogger = init_logger(
            logs_dir=config.output_dir,
            run_id=run_id or datetime.now().strftime("%Y%m%d_%H%M%S"),
            verbose=verbose,
        )
        if config.workers > 1:
            # fits run side by side; keep each one single-threaded
            torch.set_num_threads(1)

    def close(self) -> None:
        self.logger.close()

    # ------------------------------------------------------------------
    # Data
    # ------------------------------------------------------------------

    def load_data(self) -> LoadedData:
        """Read or generate the dataset, then standardize it."""
        truth = None
        if self.config.dataset is not None:
            raw = Dataset.from_csv(self.config.dataset)
            source = str(self.config.dataset)
        else:
            assert self.config.generator is not None
            raw, truth = generate(self.config.generator)
            raw.to_csv(self.store.path(DATA_FILE))
            raw.write_provenance(Dataset.provenance_path(self.store.path(DATA_FILE)))
            write_edge_list(truth, self.store.path(TRUE_EDGES_FILE))
            source = f"generator ({self.config.generator.graph.value}/{self.config.generator.generator.value})"
        dataset = standardize(raw)
        self.logger.dataset(source, dataset.n, dataset.dim, dataset.standardized)
        return LoadedData(dataset, truth)

    def _evaluate(self, truth: Dag | None, predicted: Dag) -> MetricsReport | None:
        if truth is None:
            return None
        report = evaluate_graphs(truth, predicted)
        self.logger.metrics(report.shd, report.sid, report.f1)
        self.store.save_metrics(report)
        return report

    # ------------------------------------------------------------------
    # Continuous discovery
    # ------------------------------------------------------------------

    def run_discover(self) -> tuple[DiscoveryResult, list[DiscoveryResult]]:
        """Restarts of the continuous driver; raises AllRestartsFailed if none succeeds."""
        self.logger.section(f"DISCOVER ({len(self.config.seeds)} restarts)")
        self.store.save_config(self.config)
        data = self.load_data()

        with Progress(
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            MofNCompleteColumn(),
            console=console,
        ) as progress:
            task = progress.add_task("Restarts", total=len(self.config.seeds))

            def on_result(result: DiscoveryResult) -> None:
                edges = len(result.edges) if result.succeeded else 0
                self.logger.restart_end(result.seed, result.status.value, result.final_elbo, edges)
                progress.advance(task)

            self.logger.info(f"Seeds: {self.config.seeds} on {self.config.workers} worker(s)")
            try:
                best, results = run_restarts(
                    data.dataset.values,
                    self.config.training,
                    self.config.seeds,
                    workers=self.config.workers,
                    on_result=on_result,
                )
            except AllRestartsFailed as exc:
                self.logger.error(str(exc))
                raise

        self.logger.best_restart(best.seed, best.final_elbo or float("nan"))
        metrics = self._evaluate(data.truth, best.dag)
        extra = {"metrics": metrics.to_dict()} if metrics else {}
        for path in self.store.save_discovery(best, results, extra):
            self.logger.artifact(path)
        return best, results

    # ------------------------------------------------------------------
    # Enumeration
    # ------------------------------------------------------------------

    def _select(
        self, values: np.ndarray, base_seed: int, description: str
    ) -> list[RankedGraph]:
        with Progress(
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            MofNCompleteColumn(),
            console=console,
            transient=True,
        ) as progress:
            task = progress.add_task(description, total=None)

            def on_progress(done: int, total: int) -> None:
                progress.update(task, completed=done, total=total)

            return select_discrete(
                values,
                self.config.training,
                base_seed=base_seed,
                workers=self.config.workers,
                on_progress=on_progress,
            )

    def run_enumerate(self) -> list[RankedGraph]:
        """Score every DAG on the dataset's variables and rank them."""
        self.logger.section("ENUMERATE")
        self.store.save_config(self.config)
        data = self.load_data()
        ranking = self._select(data.dataset.values, self.config.seeds[0], "Node fits")
        for index, entry in enumerate(ranking):
            self.logger.graph_fit(index, len(ranking), entry.dag.sorted_edges(), entry.elbo)
        metrics = self._evaluate(data.truth, ranking[0].dag)
        extra = {"metrics": metrics.to_dict()} if metrics else {}
        for path in self.store.save_ranking(ranking, extra):
            self.logger.artifact(path)
        return ranking

    def run(self) -> DiscoveryResult | list[RankedGraph]:
        if self.config.mode is Mode.ENUMERATE:
            return self.run_enumerate()
        return self.run_discover()[0]

    # ------------------------------------------------------------------
    # Error rate
    # ------------------------------------------------------------------

    def run_error_rate(
        self,
        datasets_per_structure: int,
        on_trial: Callable[[TrialRecord], None] | None = None,
    ) -> ErrorRateReport:
        """Sample datasets from every distinct structure and tally how often selection recovers it.

        Uses the generator's d, n and seed; its graph family is ignored.
        """
        spec = self.config.generator
        if spec is None:
            raise ConfigError("error-rate estimation needs a generator spec")
        if spec.generator is not GeneratorKind.GP:
            raise ConfigError("error-rate estimation samples from the GP-CDE prior (generator 'gp')")
        self.logger.section(f"ERROR RATE ({datasets_per_structure} datasets per structure)")
        self.store.save_config(self.config)

        report = ErrorRateReport()
        structures = distinct_structures(spec.d, self.config.training.dgpcde_D_cap)
        for s, truth in enumerate(structures):
            for k in range(datasets_per_structure):
                dataset_seed = spec.seed + 1000 * s + k
                record = TrialRecord(s, dataset_seed, truth.sorted_edges())
                try:
                    raw = sample_gpcde_dataset(truth, spec.n, np.random.default_rng(dataset_seed))
                    ranking = self._select(
                        standardize(raw).values,
                        dataset_seed,
                        f"Structure {s + 1}/{len(structures)}, dataset {k + 1}",
                    )
                    record.map_edges = ranking[0].dag.sorted_edges()
                    record.map_elbo = ranking[0].elbo
                    record.metrics = evaluate_graphs(truth, ranking[0].dag)
                    self.logger.info(f"{truth} -> {ranking[0].dag}: {record.metrics.format_summary()}")
                except (NumericalError, AllRestartsFailed) as exc:
                    record.error = str(exc)
                    self.logger.warning(f"{truth}, dataset seed {dataset_seed}: {exc}")
                report.add(record)
                if on_trial:
                    on_trial(record)

        self.logger.artifact(
            self.store.save_error_rate(report, {"d": spec.d, "n": spec.n, "structures": len(structures)})
        )
        return report
