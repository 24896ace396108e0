"""Metric reports for single comparisons and for repeated recovery trials."""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from typing import Any

from causal_cde.graphs import Dag
from causal_cde.metrics.structural import (
    f1_score,
    markov_equivalent,
    precision_recall,
    shd,
    sid,
)


@dataclass
class MetricsReport:
    """Comparison of one predicted graph against the truth."""

    shd: int
    sid: int
    f1: float
    precision: float
    recall: float
    predicted_edge_count: int
    true_edge_count: int
    exact: bool
    markov_equivalent: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "shd": self.shd,
            "sid": self.sid,
            "f1": self.f1,
            "precision": self.precision,
            "recall": self.recall,
            "predicted_edge_count": self.predicted_edge_count,
            "true_edge_count": self.true_edge_count,
            "exact": self.exact,
            "markov_equivalent": self.markov_equivalent,
        }

    def format_summary(self) -> str:
        return (
            f"SHD {self.shd}, SID {self.sid}, F1 {self.f1:.3f} "
            f"({self.predicted_edge_count} predicted / {self.true_edge_count} true edges)"
        )


def evaluate_graphs(true_g: Dag, pred_g: Dag) -> MetricsReport:
    precision, recall = precision_recall(true_g, pred_g)
    return MetricsReport(
        shd=shd(true_g, pred_g),
        sid=sid(true_g, pred_g),
        f1=f1_score(true_g, pred_g),
        precision=precision,
        recall=recall,
        predicted_edge_count=pred_g.edge_count,
        true_edge_count=true_g.edge_count,
        exact=true_g.edges == pred_g.edges,
        markov_equivalent=markov_equivalent(true_g, pred_g),
    )


@dataclass
class TrialRecord:
    """One error-rate trial: a sampled dataset and the graph selected for it."""

    structure: int
    dataset_seed: int
    true_edges: list[tuple[int, int]]
    map_edges: list[tuple[int, int]] | None = None
    map_elbo: float | None = None
    metrics: MetricsReport | None = None
    error: str | None = None

    @property
    def succeeded(self) -> bool:
        return self.metrics is not None

    def to_dict(self) -> dict[str, Any]:
        return {
            "structure": self.structure,
            "dataset_seed": self.dataset_seed,
            "true_edges": [list(e) for e in self.true_edges],
            "map_edges": None if self.map_edges is None else [list(e) for e in self.map_edges],
            "map_elbo": self.map_elbo,
            "metrics": None if self.metrics is None else self.metrics.to_dict(),
            "error": self.error,
        }


@dataclass
class ErrorRateReport:
    """Aggregate of repeated sample-then-select trials."""

    records: list[TrialRecord] = field(default_factory=list)

    def add(self, record: TrialRecord) -> None:
        self.records.append(record)

    @property
    def scored(self) -> list[MetricsReport]:
        return [r.metrics for r in self.records if r.metrics is not None]

    @property
    def failed(self) -> int:
        return sum(1 for r in self.records if not r.succeeded)

    @property
    def recovery_rate(self) -> float:
        """Fraction of all trials whose selected graph equals the truth."""
        if not self.records:
            return 0.0
        return sum(1 for m in self.scored if m.exact) / len(self.records)

    @property
    def mec_recovery_rate(self) -> float:
        if not self.records:
            return 0.0
        return sum(1 for m in self.scored if m.markov_equivalent) / len(self.records)

    @property
    def median_shd(self) -> float | None:
        if not self.scored:
            return None
        return float(statistics.median(m.shd for m in self.scored))

    @property
    def mean_sid(self) -> float | None:
        if not self.scored:
            return None
        return statistics.mean(m.sid for m in self.scored)

    @property
    def mean_f1(self) -> float | None:
        if not self.scored:
            return None
        return statistics.mean(m.f1 for m in self.scored)

    def to_dict(self) -> dict[str, Any]:
        return {
            "trials": len(self.records),
            "failed": self.failed,
            "recovery_rate": self.recovery_rate,
            "mec_recovery_rate": self.mec_recovery_rate,
            "median_shd": self.median_shd,
            "mean_sid": self.mean_sid,
            "mean_f1": self.mean_f1,
            "records": [r.to_dict() for r in self.records],
        }
