"""Exhaustive discovery: fit a GP-CDE for every DAG and rank by the bound.

The bound of a graph is a sum of per-node bounds, and a node's bound depends
only on its own parent set. Each distinct (node, parents, seed) fit is
therefore run once and shared by every graph that contains it.
"""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import torch

from causal_cde.config import TrainConfig
from causal_cde.discovery.continuous import check_data
from causal_cde.errors import AllRestartsFailed, ContractViolation, NumericalError
from causal_cde.gp import DTYPE, FreeLatent, NodeModel, node_elbo
from causal_cde.graphs import Dag, enumerate_dags
from causal_cde.optim import AdamState, adam_step, expectation_grads, natgrad_step
from causal_cde.workers import PoolConfig, WorkerPool, WorkUnit

logger = logging.getLogger("causal_cde.discovery")

DISCRETE_KERNELS = ("lin", "sqe")
LBFGS_DISABLED_NOTE = "quasi-Newton refinement disabled; Adam with a decaying learning rate used"

NodeKey = tuple[int, tuple[int, ...], int]  # (target, parents, seed)


@dataclass
class NodeFit:
    """Bound of one node given one parent set and seed."""

    target: int
    parents: tuple[int, ...]
    seed: int
    elbo: float
    deviations: list[str] = field(default_factory=list)
    error: str | None = None

    @property
    def succeeded(self) -> bool:
        return self.error is None and math.isfinite(self.elbo)


@dataclass
class DiscreteFit:
    """Bound of a whole graph for one seed."""

    dag: Dag
    seed: int
    elbo: float
    node_elbos: list[float]
    deviations: list[str] = field(default_factory=list)
    error: str | None = None

    @property
    def succeeded(self) -> bool:
        return self.error is None and math.isfinite(self.elbo)


@dataclass(frozen=True)
class RankedGraph:
    """A graph with its best bound over restarts."""

    dag: Dag
    elbo: float
    seed: int | None = None


def _node_rng(seed: int, target: int, parents: Sequence[int]) -> np.random.Generator:
    mask = sum(1 << p for p in parents)
    return np.random.default_rng([seed, target, mask])


def _standard_normal_baseline(y: torch.Tensor) -> float:
    return float((-0.5 * math.log(2.0 * math.pi) - 0.5 * y**2).sum())


def _build_node(
    X: torch.Tensor,
    target: int,
    parents: Sequence[int],
    config: TrainConfig,
    rng: np.random.Generator,
) -> NodeModel:
    """Linear + squared-exponential GP-CDE with free per-row latent posteriors.

    Noise variance ~ U(1e-4, 1e-2), theta ~ U(1, 100), latent means 0.1 * x and
    latent variances ~ U(0, 0.1).
    """
    n = X.shape[0]
    y = X[:, target]
    latent_var = np.maximum(rng.uniform(0.0, 0.1, n), 1e-6)
    latent = FreeLatent(0.1 * y, torch.as_tensor(latent_var, dtype=DTYPE))
    node = NodeModel(
        target,
        list(parents),
        min(config.discrete_inducing, n),
        latent,
        kernels=DISCRETE_KERNELS,
        jitter=config.jitter,
    )
    for name in DISCRETE_KERNELS:
        node.set_theta(name, torch.as_tensor(rng.uniform(1.0, 100.0, node.input_dim)))
    node.set_variance("sqe", 1.0)
    node.set_noise_var(float(rng.uniform(1e-4, 1e-2)))
    rows = rng.choice(n, size=node.num_inducing, replace=False)
    index = torch.as_tensor(rows)
    node.set_inducing(torch.cat([X[index][:, list(parents)], 0.1 * y[index].unsqueeze(1)], dim=1))
    node.reset_q_to_prior()
    return node


def _natgrad_update(
    node: NodeModel,
    X: torch.Tensor,
    step: float,
    mc_samples: int,
    eps: torch.Tensor | None,
    generator: torch.Generator | None,
) -> torch.Tensor:
    """Take one natural-gradient step on q(u) and return the bound before it."""
    q = node.q_u()
    mean = q.mean.clone().requires_grad_(True)
    cov = q.covariance.clone().requires_grad_(True)
    elbo = node_elbo(
        node, X, node.target, mc_samples, X.shape[0], generator, eps=eps, q_mean=mean, q_cov=cov
    )
    grad_mean, grad_cov = torch.autograd.grad(elbo, [mean, cov], retain_graph=True)
    node.set_q_u(natgrad_step(q, expectation_grads(grad_mean, grad_cov, mean.detach()), step))
    return elbo


def _adam_stage(
    node: NodeModel, X: torch.Tensor, config: TrainConfig, generator: torch.Generator, decay: bool
) -> None:
    params = node.hyperparameters()
    adam = AdamState.for_params(
        params, config.discrete_lr, config.adam_beta1, config.adam_beta2, config.adam_eps
    )
    baseline = _standard_normal_baseline(X[:, node.target])
    steps = config.discrete_adam_steps
    for t in range(steps):
        if decay:
            adam.lr = config.discrete_lr * 0.01 ** (t / max(1, steps))
        elbo = _natgrad_update(node, X, config.natgrad_step, config.mc_samples, None, generator)
        grads = torch.autograd.grad(elbo, params, allow_unused=True)
        adam_step(adam, params, list(grads), node.trainable_masks())
        if not decay and float(elbo) > baseline:
            logger.debug(f"node {node.target}: bound passed the noise baseline after {t + 1} steps")
            break


def _lbfgs_stage(
    node: NodeModel, X: torch.Tensor, config: TrainConfig, eps: torch.Tensor
) -> list[str]:
    """Alternate exact-size natural-gradient steps with quasi-Newton hyperparameter steps."""
    params = node.hyperparameters()
    for round_ in range(config.discrete_bfgs_iters):
        saved = copy.deepcopy(node.state_dict())
        try:
            _natgrad_update(node, X, 1.0, config.mc_samples, eps, None)
            optimizer = torch.optim.LBFGS(
                params, lr=1.0, max_iter=config.lbfgs_max_iter, line_search_fn="strong_wolfe"
            )

            def closure() -> torch.Tensor:
                optimizer.zero_grad()
                loss = -node_elbo(node, X, node.target, eps.shape[0], X.shape[0], eps=eps)
                loss.backward()
                return loss

            optimizer.step(closure)
            for p in params:
                if not bool(torch.isfinite(p).all()):
                    raise NumericalError("quasi-Newton step produced non-finite parameters")
        except NumericalError as exc:
            node.load_state_dict(saved)
            note = f"node {node.target}: quasi-Newton round {round_} diverged ({exc}); kept previous state"
            return [note]
    return []


def fit_node(
    data: np.ndarray, target: int, parents: Sequence[int], config: TrainConfig, seed: int
) -> NodeFit:
    """Optimise one node's GP-CDE and report its bound with frozen latent draws."""
    parents = tuple(sorted(int(p) for p in parents))
    X = torch.as_tensor(np.asarray(data, dtype=np.float64), dtype=DTYPE)
    rng = _node_rng(seed, target, parents)
    generator = torch.Generator().manual_seed(int(rng.integers(2**62)))
    deviations: list[str] = []
    try:
        node = _build_node(X, target, parents, config, rng)
        _adam_stage(node, X, config, generator, decay=not config.use_bfgs)
        eps = torch.randn(config.mc_samples, X.shape[0], generator=generator, dtype=DTYPE)
        if config.use_bfgs:
            deviations.extend(_lbfgs_stage(node, X, config, eps))
        else:
            deviations.append(LBFGS_DISABLED_NOTE)
        with torch.no_grad():
            elbo = float(node_elbo(node, X, target, config.mc_samples, X.shape[0], eps=eps))
    except NumericalError as exc:
        logger.warning(f"node {target} with parents {list(parents)} (seed {seed}) failed: {exc}")
        return NodeFit(target, parents, seed, -math.inf, deviations, str(exc))
    return NodeFit(target, parents, seed, elbo, deviations)


def _combine(dag: Dag, seed: int, fits: dict[NodeKey, NodeFit]) -> DiscreteFit:
    node_fits = [fits[(i, tuple(dag.parents(i)), seed)] for i in range(dag.dim)]
    errors = [f.error for f in node_fits if f.error]
    deviations = [d for f in node_fits for d in f.deviations]
    elbo = sum(f.elbo for f in node_fits) if not errors else -math.inf
    return DiscreteFit(
        dag=dag,
        seed=seed,
        elbo=elbo,
        node_elbos=[f.elbo for f in node_fits],
        deviations=sorted(set(deviations)),
        error="; ".join(errors) if errors else None,
    )


def _fit_nodes(
    data: np.ndarray,
    keys: Sequence[NodeKey],
    config: TrainConfig,
    workers: int,
    on_complete: Callable[[WorkUnit[NodeFit]], None] | None = None,
) -> dict[NodeKey, NodeFit]:
    units = [
        WorkUnit(fn=lambda k=key: fit_node(data, k[0], k[1], config, k[2]), id=f"node-{key}")
        for key in keys
    ]
    done = WorkerPool(PoolConfig(max_workers=workers)).run(units, on_complete=on_complete)
    fits = {}
    for key, unit in zip(keys, done):
        if unit.result is not None:
            fits[key] = unit.result
        else:
            fits[key] = NodeFit(key[0], key[1], key[2], -math.inf, error=unit.error)
    return fits


def fit_discrete_detailed(
    data: np.ndarray, dag: Dag, config: TrainConfig, seed: int, workers: int = 1
) -> DiscreteFit:
    """Per-node fits with inputs restricted to parents (plus the latent)."""
    X = check_data(data)
    if dag.dim != X.shape[1]:
        raise ContractViolation(f"graph has {dag.dim} nodes but data has {X.shape[1]} columns")
    keys = [(i, tuple(dag.parents(i)), seed) for i in range(dag.dim)]
    return _combine(dag, seed, _fit_nodes(X, keys, config, workers))


def fit_discrete(data: np.ndarray, dag: Dag, config: TrainConfig, seed: int) -> float:
    """Summed bound of ``dag``; -inf when any node fit diverged."""
    return fit_discrete_detailed(data, dag, config, seed).elbo


def select_discrete(
    data: np.ndarray,
    config: TrainConfig,
    restarts_per_graph: int | None = None,
    base_seed: int = 0,
    workers: int = 1,
    on_progress: Callable[[int, int], None] | None = None,
) -> list[RankedGraph]:
    """Rank every DAG on D <= cap nodes by its best bound over restarts.

    Restart r uses seed ``base_seed + r``. Graphs are scored by their bound
    alone, i.e. a uniform prior over DAGs. The first entry is the MAP graph.
    """
    X = check_data(data)
    dags = enumerate_dags(X.shape[1], config.dgpcde_D_cap)
    restarts = restarts_per_graph or config.discrete_restarts
    seeds = [base_seed + r for r in range(restarts)]

    keys = sorted(
        {(i, tuple(dag.parents(i)), seed) for dag in dags for i in range(dag.dim) for seed in seeds}
    )
    completed = 0

    def progress(unit: WorkUnit[NodeFit]) -> None:
        nonlocal completed
        completed += 1
        if on_progress:
            on_progress(completed, len(keys))

    fits = _fit_nodes(X, keys, config, workers, progress)

    ranking = []
    for dag in dags:
        per_seed = [_combine(dag, seed, fits) for seed in seeds]
        best = max(per_seed, key=lambda f: (f.elbo, -f.seed))
        ranking.append(RankedGraph(dag, best.elbo, best.seed if best.succeeded else None))

    if all(not math.isfinite(r.elbo) for r in ranking):
        errors = {key[2]: fit.error or "failed" for key, fit in fits.items() if not fit.succeeded}
        raise AllRestartsFailed(errors)
    ranking.sort(key=lambda r: (-r.elbo, r.dag.sorted_edges()))
    logger.info(f"MAP graph {ranking[0].dag} with ELBO {ranking[0].elbo:.4f}")
    return ranking
