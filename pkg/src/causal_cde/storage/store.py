"""File-based run store: every artifact of a run lives in one directory."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Sequence

from causal_cde.config import RunConfig
from causal_cde.discovery import DiscoveryResult, RankedGraph
from causal_cde.graphs import Dag, write_adjacency_csv, write_edge_list
from causal_cde.metrics import ErrorRateReport, MetricsReport

CONFIG_FILE = "config.json"
ADJACENCY_FILE = "adjacency.csv"
EDGES_FILE = "edges.txt"
TRACE_FILE = "trace.csv"
SUMMARY_FILE = "summary.json"
RANKING_FILE = "ranking.csv"
MAP_EDGES_FILE = "map_edges.txt"
METRICS_FILE = "metrics.json"
ERROR_RATE_FILE = "error_rate.json"

TRACE_COLUMNS = ["restart", "phase", "step", "loss", "elbo", "h", "alpha", "rho"]


def format_edges(dag: Dag) -> str:
    """Compact ``p>c`` list separated by ``;`` (empty string for no edges)."""
    return ";".join(f"{p}>{c}" for p, c in dag.sorted_edges())


def parse_edges(text: str, dim: int) -> Dag:
    edges = []
    for token in filter(None, text.split(";")):
        parent, child = token.split(">")
        edges.append((int(parent), int(child)))
    return Dag.from_edges(dim, edges)


class RunStore:
    """Writes and reads the artifacts of one run directory."""

    def __init__(self, run_dir: Path):
        self.run_dir = run_dir
        self.run_dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.run_dir / name

    def _write_json(self, name: str, payload: Any) -> Path:
        target = self.path(name)
        with open(target, "w") as f:
            json.dump(payload, f, indent=2, sort_keys=True, default=str)
            f.write("\n")
        return target

    def _read_json(self, name: str) -> Any:
        with open(self.path(name)) as f:
            return json.load(f)

    # ------------------------------------------------------------------
    # Config
    # ------------------------------------------------------------------

    def save_config(self, config: RunConfig) -> Path:
        config.to_json(self.path(CONFIG_FILE))
        return self.path(CONFIG_FILE)

    def load_config(self) -> RunConfig:
        return RunConfig.from_json(self.path(CONFIG_FILE))

    # ------------------------------------------------------------------
    # Continuous discovery
    # ------------------------------------------------------------------

    def save_discovery(
        self,
        best: DiscoveryResult,
        results: Sequence[DiscoveryResult],
        extra: dict[str, Any] | None = None,
    ) -> list[Path]:
        """Adjacency, edge list and summary of the best restart plus the trace of all."""
        write_adjacency_csv(best.weighted_adjacency, self.path(ADJACENCY_FILE))
        write_edge_list(best.dag, self.path(EDGES_FILE))

        with open(self.path(TRACE_FILE), "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(TRACE_COLUMNS)
            for result in results:
                for record in result.trace:
                    writer.writerow(
                        [
                            result.seed,
                            record.phase.value,
                            record.step,
                            repr(record.loss),
                            repr(record.elbo),
                            repr(record.h),
                            repr(record.alpha),
                            repr(record.rho),
                        ]
                    )

        summary = {
            "mode": "discover",
            "best_seed": best.seed,
            "final_elbo": best.final_elbo,
            "edges": [list(e) for e in best.dag.sorted_edges()],
            "h_history": best.h_history,
            "phase_boundaries": best.phase_boundaries,
            "deviations": best.deviations,
            "restarts": [r.summary() for r in results],
            **(extra or {}),
        }
        self._write_json(SUMMARY_FILE, summary)
        return [self.path(n) for n in (ADJACENCY_FILE, EDGES_FILE, TRACE_FILE, SUMMARY_FILE)]

    def load_summary(self) -> dict[str, Any]:
        return self._read_json(SUMMARY_FILE)

    # ------------------------------------------------------------------
    # Enumeration
    # ------------------------------------------------------------------

    def save_ranking(
        self, ranking: Sequence[RankedGraph], extra: dict[str, Any] | None = None
    ) -> list[Path]:
        with open(self.path(RANKING_FILE), "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["rank", "elbo", "seed", "edges"])
            for rank, entry in enumerate(ranking, start=1):
                seed = "" if entry.seed is None else entry.seed
                writer.writerow([rank, repr(entry.elbo), seed, format_edges(entry.dag)])
        write_edge_list(ranking[0].dag, self.path(MAP_EDGES_FILE))

        summary = {
            "mode": "enumerate",
            "graphs": len(ranking),
            "map_edges": [list(e) for e in ranking[0].dag.sorted_edges()],
            "map_elbo": ranking[0].elbo,
            **(extra or {}),
        }
        self._write_json(SUMMARY_FILE, summary)
        return [self.path(n) for n in (RANKING_FILE, MAP_EDGES_FILE, SUMMARY_FILE)]

    def load_ranking(self, dim: int) -> list[RankedGraph]:
        ranking = []
        with open(self.path(RANKING_FILE), newline="") as f:
            for row in csv.DictReader(f):
                seed = int(row["seed"]) if row["seed"] else None
                ranking.append(RankedGraph(parse_edges(row["edges"], dim), float(row["elbo"]), seed))
        return ranking

    # ------------------------------------------------------------------
    # Metrics
    # ------------------------------------------------------------------

    def save_metrics(self, report: MetricsReport) -> Path:
        return self._write_json(METRICS_FILE, report.to_dict())

    def save_error_rate(self, report: ErrorRateReport, extra: dict[str, Any] | None = None) -> Path:
        return self._write_json(ERROR_RATE_FILE, {**report.to_dict(), **(extra or {})})
