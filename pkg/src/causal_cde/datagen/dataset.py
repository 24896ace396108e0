"""Tabular datasets with provenance, CSV storage and standardization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from causal_cde.errors import ContractViolation


def default_columns(dim: int) -> list[str]:
    return [f"x{k}" for k in range(dim)]


@dataclass
class Dataset:
    """N x D observations.

    ``provenance`` records where the values came from: a generator spec or the
    path of an external file.
    """

    values: np.ndarray
    columns: list[str] = field(default_factory=list)
    standardized: bool = False
    provenance: dict[str, Any] = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ContractViolation(f"dataset must be a matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ContractViolation("dataset contains non-finite values")
        self.values = values
        if not self.columns:
            self.columns = default_columns(values.shape[1])
        if len(self.columns) != values.shape[1]:
            raise ContractViolation(
                f"{len(self.columns)} column names for {values.shape[1]} columns"
            )

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])

    # ------------------------------------------------------------------
    # Storage
    # ------------------------------------------------------------------

    @staticmethod
    def provenance_path(path: Path) -> Path:
        return path.with_suffix(".json")

    def to_csv(self, path: Path) -> None:
        """Write a header row of column names and full-precision floats."""
        with open(path, "w") as f:
            f.write(",".join(self.columns) + "\n")
            np.savetxt(f, self.values, delimiter=",", fmt="%.17g")

    def write_provenance(self, path: Path) -> None:
        payload = {
            "columns": self.columns,
            "n": self.n,
            "standardized": self.standardized,
            "seed": self.seed,
            "provenance": self.provenance,
        }
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_csv(cls, path: Path) -> Dataset:
        """Read a CSV with a header row; a JSON sidecar, if present, restores provenance."""
        if not path.exists():
            raise ContractViolation(f"dataset {path} does not exist")
        with open(path) as f:
            header = f.readline().strip()
            if not header:
                raise ContractViolation(f"{path}: empty file")
            columns = [c.strip() for c in header.split(",")]
            try:
                values = np.loadtxt(f, delimiter=",", ndmin=2)
            except ValueError as exc:
                raise ContractViolation(f"{path}: {exc}") from exc
        if values.size == 0:
            raise ContractViolation(f"{path}: no data rows")

        sidecar = cls.provenance_path(path)
        seed = None
        provenance: dict[str, Any] = {"source": str(path)}
        if sidecar.exists():
            meta = json.loads(sidecar.read_text())
            seed = meta.get("seed")
            provenance = meta.get("provenance", provenance)
        return cls(values, columns, standardized=False, provenance=provenance, seed=seed)


def standardize(data: Dataset | np.ndarray) -> Dataset:
    """Shift and scale every column to mean 0 and population std 1."""
    dataset = data if isinstance(data, Dataset) else Dataset(np.asarray(data))
    values = dataset.values
    std = values.std(axis=0)
    constant = np.flatnonzero(std == 0.0)
    if constant.size:
        names = ", ".join(dataset.columns[k] for k in constant)
        raise ContractViolation(f"cannot standardize constant column(s): {names}")
    scaled = (values - values.mean(axis=0)) / std
    return replace(dataset, values=scaled, standardized=True)
