"""Configuration management for causal-cde."""

from __future__ import annotations

import json
import os
from enum import Enum
from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, Field, ValidationError, model_validator

from causal_cde.errors import ConfigError

SCHEMA_VERSION = "causal-cde/1"
THREADS_ENV = "CAUSAL_CDE_THREADS"


# ============================================================================
# ENUMS
# ============================================================================


class Profile(str, Enum):
    """Shipped training profiles."""

    PAPER = "paper"
    DESK = "desk"


class Mode(str, Enum):
    """Discovery drivers."""

    DISCOVER = "discover"
    ENUMERATE = "enumerate"


class GraphKind(str, Enum):
    """Ground-truth graph families for synthetic data."""

    ER = "er"
    SF = "sf"
    CHAIN = "chain"
    EMPTY = "empty"
    EDGES = "edges"


class GeneratorKind(str, Enum):
    """Mechanism families for synthetic data."""

    GP = "gp"
    NN = "nn"


# ============================================================================
# TRAINING
# ============================================================================


class TrainConfig(BaseModel):
    """Optimisation schedule and model sizes for both discovery drivers."""

    # Model sizes
    num_inducing: int = Field(default=400, ge=1, description="Inducing points per node")
    batch_size: int | None = Field(
        default=128, ge=1, description="Minibatch size; None means full batch"
    )
    mc_samples: int = Field(default=100, ge=1, description="Latent Monte-Carlo samples")
    encoder_layers: int = Field(default=5, ge=1)
    encoder_hidden: int = Field(default=128, ge=1)
    jitter: float = Field(default=1e-6, gt=0.0, description="Base jitter on K_uu")

    # Phase lengths
    warmup_steps: int = Field(default=30000, ge=0, description="T0")
    cooldown_steps: int = Field(default=30000, ge=1, description="Tf")
    t_conv: int = Field(default=2000, ge=2, description="Subproblem convergence window")
    max_constraint_steps: int = Field(
        default=1_000_000, ge=1, description="Safety cap on the constrained phase"
    )
    epsilon_h: float = Field(default=1e-8, gt=0.0, description="Acyclicity tolerance")
    trace_every: int = Field(default=10, ge=1, description="Record every k-th step in the trace")

    # Learning rates
    lr_warmup: float = Field(default=0.05, gt=0.0)
    lr_constraint_high: float = Field(default=0.01, gt=0.0, description="Used while h > 0.1")
    lr_constraint_low: float = Field(default=0.005, gt=0.0)
    lr_constraint_switch: float = Field(default=0.1, ge=0.0)
    lr_cooldown: float = Field(default=0.01, gt=0.0)
    natgrad_step: float = Field(default=0.1, gt=0.0, le=1.0)
    adam_beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    adam_beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    adam_eps: float = Field(default=1e-8, gt=0.0)

    # Augmented Lagrangian
    nu: float = Field(default=10.0, ge=1.0)
    gamma: float = Field(default=0.9, gt=0.0)
    alpha_init: float | None = Field(
        default=None, ge=0.0, description="None: scale alpha from the warm-up bound"
    )
    alpha_scale_fraction: float = Field(default=0.05, gt=0.0)
    rho_init: float = Field(default=0.0, ge=0.0)

    # Graph prior and thresholds
    gamma_prior_shape: float = Field(default=1.0, gt=0.0, description="eta")
    gamma_prior_rate: float = Field(default=10.0, gt=0.0, description="beta")
    warmup_theta_floor: float = Field(default=1e-4, ge=0.0)
    frozen_value: float = Field(default=1e-15, ge=0.0)
    final_linvar_thresh: float = Field(default=1e-4, ge=0.0)
    final_theta_thresh: float = Field(default=0.05, ge=0.0)

    # Discrete enumeration mode
    dgpcde_D_cap: int = Field(default=4, ge=1, le=6)
    discrete_inducing: int = Field(default=200, ge=1)
    discrete_lr: float = Field(default=0.05, gt=0.0)
    discrete_adam_steps: int = Field(default=2000, ge=0)
    use_bfgs: bool = Field(default=True)
    discrete_bfgs_iters: int = Field(default=10, ge=0, description="Outer quasi-Newton rounds")
    lbfgs_max_iter: int = Field(default=20, ge=1, description="Inner iterations per quasi-Newton round")
    discrete_restarts: int = Field(default=10, ge=1)

    @model_validator(mode="after")
    def check_schedule(self) -> TrainConfig:
        if self.final_linvar_thresh > self.final_theta_thresh:
            raise ValueError("final_linvar_thresh must not exceed final_theta_thresh")
        if self.frozen_value >= self.warmup_theta_floor > 0:
            raise ValueError("frozen_value must be below warmup_theta_floor")
        return self

    @classmethod
    def paper(cls) -> TrainConfig:
        """Full-scale schedule."""
        return cls()

    @classmethod
    def desk(cls) -> TrainConfig:
        """Scaled-down schedule for laptops and CI."""
        return cls(
            num_inducing=64,
            batch_size=None,
            mc_samples=25,
            warmup_steps=3000,
            cooldown_steps=3000,
            t_conv=200,
            max_constraint_steps=20000,
            discrete_inducing=64,
            discrete_adam_steps=500,
            discrete_bfgs_iters=5,
            discrete_restarts=3,
        )

    @classmethod
    def for_profile(cls, profile: Profile | str) -> TrainConfig:
        return cls.desk() if Profile(profile) is Profile.DESK else cls.paper()


# ============================================================================
# DATA GENERATION
# ============================================================================


class GeneratorSpec(BaseModel):
    """A synthetic dataset: ground-truth graph family plus mechanism family."""

    graph: GraphKind = Field(default=GraphKind.ER)
    generator: GeneratorKind = Field(default=GeneratorKind.NN)
    d: int = Field(default=10, ge=1, description="Number of variables")
    edges: float = Field(default=15.0, ge=0.0, description="Expected edge count (er/sf)")
    n: int = Field(default=1000, ge=2, description="Number of samples")
    seed: int = Field(description="Seed for graph and data")
    edge_list: list[tuple[int, int]] | None = Field(
        default=None, description="Explicit edges when graph == 'edges'"
    )

    @model_validator(mode="after")
    def check_graph(self) -> GeneratorSpec:
        if self.graph is GraphKind.EDGES and self.edge_list is None:
            raise ValueError("graph 'edges' requires edge_list")
        if self.graph in (GraphKind.ER, GraphKind.SF):
            max_edges = self.d * (self.d - 1) / 2
            if self.edges > max_edges:
                raise ValueError(f"{self.edges} expected edges infeasible for d={self.d}")
        if self.generator is GeneratorKind.GP and self.n > 3000:
            raise ValueError("gp generator uses dense factorization; n must be <= 3000")
        return self


# ============================================================================
# RUN
# ============================================================================


def default_workers() -> int:
    """Worker count: CAUSAL_CDE_THREADS, else physical cores (cpu_count fallback)."""
    override = os.environ.get(THREADS_ENV)
    if override:
        try:
            value = int(override)
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV}={override!r} is not an integer") from exc
        if value < 1:
            raise ConfigError(f"{THREADS_ENV} must be >= 1, got {value}")
        return value
    logical = os.cpu_count() or 1
    # logical CPUs usually expose two hardware threads per core
    return max(1, logical // 2) if logical > 1 else 1


class RunConfig(BaseModel):
    """A complete, self-describing run: what to fit, on which data, how."""

    schema_version: str = Field(default=SCHEMA_VERSION)
    mode: Mode = Field(default=Mode.DISCOVER)
    profile: Profile = Field(default=Profile.DESK)
    dataset: Path | None = Field(default=None, description="CSV with a header row")
    generator: GeneratorSpec | None = Field(default=None)
    seeds: list[int] = Field(default_factory=lambda: [0])
    output_dir: Path = Field(default=Path("runs"))
    workers: int = Field(default_factory=default_workers, ge=1)
    train: TrainConfig | None = Field(default=None)

    @model_validator(mode="after")
    def check_run(self) -> RunConfig:
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(
                f"unsupported schema_version {self.schema_version!r}, expected {SCHEMA_VERSION!r}"
            )
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError(f"seeds must be unique, got {self.seeds}")
        if (self.dataset is None) == (self.generator is None):
            raise ValueError("exactly one of 'dataset' and 'generator' must be given")
        if self.dataset is not None and not self.dataset.exists():
            raise ValueError(f"dataset {self.dataset} does not exist")
        if self.train is None:
            self.train = TrainConfig.for_profile(self.profile)
        return self

    @property
    def training(self) -> TrainConfig:
        assert self.train is not None
        return self.train

    # ------------------------------------------------------------------
    # Serialization
    # ------------------------------------------------------------------

    def snapshot(self) -> dict[str, Any]:
        """JSON-ready dict; ``workers`` is excluded because it never changes results."""
        return self.model_dump(mode="json", exclude={"workers"})

    def to_json(self, path: Path) -> None:
        path.write_text(json.dumps(self.snapshot(), indent=2, sort_keys=True) + "\n")

    def to_yaml(self, path: Path) -> None:
        with open(path, "w") as f:
            yaml.dump(self.snapshot(), f, default_flow_style=False, sort_keys=False)

    @classmethod
    def from_dict(cls, data: dict[str, Any], source: str = "<dict>") -> RunConfig:
        try:
            return cls(**data)
        except ValidationError as exc:
            raise ConfigError(f"{source}: {exc}") from exc

    @classmethod
    def from_json(cls, path: Path) -> RunConfig:
        return cls.from_dict(json.loads(path.read_text()), str(path))

    @classmethod
    def from_yaml(cls, path: Path) -> RunConfig:
        with open(path) as f:
            data = yaml.safe_load(f) or {}
        return cls.from_dict(data, str(path))


def load_config(config_path: Path | None = None) -> RunConfig | None:
    """Load a run configuration from JSON or YAML.

    Without a path, looks for ``causal-cde.yaml`` / ``causal-cde.json`` in the
    working directory and returns None when neither exists.
    """
    if config_path is None:
        for candidate in (Path("causal-cde.yaml"), Path("causal-cde.yml"), Path("causal-cde.json")):
            if candidate.exists():
                config_path = candidate
                break
        else:
            return None
    if not config_path.exists():
        raise ConfigError(f"config file {config_path} does not exist")
    if config_path.suffix in (".yaml", ".yml"):
        return RunConfig.from_yaml(config_path)
    return RunConfig.from_json(config_path)
