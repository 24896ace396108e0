"""Continuous-relaxation discovery: warm-up, constrained phase, cool-down."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import torch

from causal_cde.config import TrainConfig
from causal_cde.discovery.model import (
    CgpCdeModel,
    LossTerms,
    adjacency_from_params,
    final_threshold,
    loss_breakdown,
)
from causal_cde.discovery.results import DiscoveryResult, Phase, TraceRecord
from causal_cde.errors import ContractViolation, NumericalError
from causal_cde.gp import DTYPE
from causal_cde.graphs import WeightedAdjacency, acyclicity, threshold_to_dag
from causal_cde.optim import (
    AdamState,
    AugLagState,
    adam_step,
    auglag_update,
    expectation_grads,
    natgrad_step,
)

logger = logging.getLogger("causal_cde.discovery")

STANDARDIZED_TOL = 1e-6


def subproblem_converged(losses: deque[float] | list[float], t_conv: int) -> bool:
    """|mean(last t_conv) - mean(last t_conv / 2)| < std(last t_conv)."""
    if len(losses) < t_conv:
        return False
    window = np.asarray(list(losses)[-t_conv:])
    recent = window[-max(1, t_conv // 2) :]
    return bool(abs(window.mean() - recent.mean()) < window.std())


def initial_alpha(elbo: float, h: float, fraction: float) -> float:
    """Scale alpha so the penalty starts at ``fraction`` of the bound's magnitude."""
    if h <= 0.0:
        return 1.0
    return fraction * abs(elbo) / (h * h)


@dataclass
class _Trainer:
    """Mutable state of one run; the phases below drive it."""

    model: CgpCdeModel
    X: torch.Tensor
    config: TrainConfig
    rng: np.random.Generator
    log: logging.Logger
    trace: list[TraceRecord] = field(default_factory=list)
    step: int = 0

    def __post_init__(self) -> None:
        self.adam = self._fresh_adam(self.config.lr_warmup)

    @property
    def n(self) -> int:
        return int(self.X.shape[0])

    def _fresh_adam(self, lr: float) -> AdamState:
        return AdamState.for_params(
            self.model.hyperparameters(),
            lr=lr,
            beta1=self.config.adam_beta1,
            beta2=self.config.adam_beta2,
            eps=self.config.adam_eps,
        )

    def reset_optimizer(self, lr: float) -> None:
        self.adam = self._fresh_adam(lr)

    def _batch(self) -> tuple[torch.Tensor, torch.Tensor | None]:
        size = self.config.batch_size
        if size is None or size >= self.n:
            return self.X, None
        index = torch.as_tensor(self.rng.choice(self.n, size=size, replace=False))
        return self.X[index], index

    def evaluate(self, auglag: AugLagState | None) -> LossTerms:
        X_batch, index = self._batch()
        with torch.no_grad():
            return loss_breakdown(
                self.model,
                X_batch,
                self.n,
                self.config.mc_samples,
                auglag,
                int(self.rng.integers(2**62)),
                prior_shape=self.config.gamma_prior_shape,
                prior_rate=self.config.gamma_prior_rate,
                batch_index=index,
            )

    def train_step(self, auglag: AugLagState | None, phase: Phase) -> LossTerms:
        """Natural-gradient step on every q(u), Adam step on everything else."""
        X_batch, index = self._batch()
        leaves = []
        for node in self.model.nodes:
            q = node.q_u()
            leaves.append(
                (q.mean.clone().requires_grad_(True), q.covariance.clone().requires_grad_(True))
            )
        terms = loss_breakdown(
            self.model,
            X_batch,
            self.n,
            self.config.mc_samples,
            auglag,
            int(self.rng.integers(2**62)),
            prior_shape=self.config.gamma_prior_shape,
            prior_rate=self.config.gamma_prior_rate,
            batch_index=index,
            q_overrides=leaves,
        )
        params = self.model.hyperparameters()
        flat_leaves = [t for pair in leaves for t in pair]
        grads = torch.autograd.grad(terms.loss, params + flat_leaves, allow_unused=True)
        hyper_grads = list(grads[: len(params)])
        q_grads = grads[len(params) :]

        for k, node in enumerate(self.model.nodes):
            grad_mean, grad_cov = q_grads[2 * k], q_grads[2 * k + 1]
            if grad_mean is None or grad_cov is None:
                continue
            mean = leaves[k][0].detach()
            node.set_q_u(
                natgrad_step(
                    node.q_u(),
                    expectation_grads(grad_mean, grad_cov, mean),
                    self.config.natgrad_step,
                )
            )
        adam_step(self.adam, params, hyper_grads, self.model.trainable_masks())

        self.step += 1
        if self.step % self.config.trace_every == 0:
            state = auglag or AugLagState(alpha=0.0, rho=0.0)
            self.trace.append(
                TraceRecord(
                    phase=phase,
                    step=self.step,
                    loss=float(terms.loss),
                    elbo=float(terms.elbo),
                    h=float(terms.h),
                    alpha=state.alpha,
                    rho=state.rho,
                )
            )
        return terms


def check_data(data: np.ndarray) -> np.ndarray:
    X = np.asarray(data, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2 or X.shape[1] < 1:
        raise ContractViolation(f"expected an N x D matrix with N >= 2, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ContractViolation("data contains non-finite values")
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    if np.any(np.abs(means) > STANDARDIZED_TOL) or np.any(np.abs(stds - 1.0) > STANDARDIZED_TOL):
        logger.warning("data does not look standardized (column means/stds off 0/1)")
    return X


def train_continuous(
    data: np.ndarray,
    config: TrainConfig,
    seed: int,
    log: logging.Logger | None = None,
) -> DiscoveryResult:
    """Fit the continuous relaxation once and return the thresholded graph.

    Numerical failures end the run with a failed result instead of raising.
    """
    log = log or logger
    X_np = check_data(data)
    dim = X_np.shape[1]
    snapshot = config.model_dump(mode="json")
    rng = np.random.default_rng(seed)
    boundaries: dict[str, int] = {}
    h_history: list[float] = []
    deviations: list[str] = []
    trainer: _Trainer | None = None
    auglag = AugLagState()

    try:
        model = CgpCdeModel.from_config(X_np, config, rng)
        trainer = _Trainer(model, torch.as_tensor(X_np, dtype=DTYPE), config, rng, log)

        # Warm-up
        # Without a configured alpha0 the penalty is off until the warm-up bound is known.
        warmup = AugLagState(
            alpha=config.alpha_init if config.alpha_init is not None else 0.0,
            rho=config.rho_init,
        )
        log.info(f"seed {seed}: warm-up for {config.warmup_steps} steps")
        boundaries[Phase.WARMUP.value] = trainer.step
        warmup_elbos: deque[float] = deque(maxlen=config.t_conv)
        for _ in range(config.warmup_steps):
            warmup_elbos.append(float(trainer.train_step(warmup, Phase.WARMUP).elbo))
        frozen = model.freeze_below(config.warmup_theta_floor, config.frozen_value)
        log.info(f"seed {seed}: froze {frozen} theta entries below {config.warmup_theta_floor:g}")

        # Constrained phase
        boundaries[Phase.CONSTRAINT.value] = trainer.step
        h = acyclicity(adjacency_from_params(model))
        if not warmup_elbos:
            warmup_elbos.append(float(trainer.evaluate(None).elbo))
        alpha = (
            config.alpha_init
            if config.alpha_init is not None
            else initial_alpha(float(np.mean(warmup_elbos)), h, config.alpha_scale_fraction)
        )
        auglag = AugLagState(alpha=alpha, rho=config.rho_init, h_prev=h)
        log.info(f"seed {seed}: constrained phase from h={h:.3e} (alpha0={alpha:.3g})")
        losses: deque[float] = deque(maxlen=config.t_conv)
        steps = 0
        while h >= config.epsilon_h and steps < config.max_constraint_steps:
            trainer.adam.lr = (
                config.lr_constraint_high
                if h > config.lr_constraint_switch
                else config.lr_constraint_low
            )
            terms = trainer.train_step(auglag, Phase.CONSTRAINT)
            steps += 1
            losses.append(float(terms.loss))
            h = acyclicity(adjacency_from_params(model))
            if subproblem_converged(losses, config.t_conv):
                auglag = auglag_update(auglag, h, config.nu, config.gamma)
                h_history.append(h)
                losses.clear()
                log.info(
                    f"seed {seed}: subproblem {auglag.subproblem_index} converged, "
                    f"h={h:.3e} alpha={auglag.alpha:.3g} rho={auglag.rho:.3g}"
                )
        if h >= config.epsilon_h:
            note = (
                f"constrained phase stopped at the {config.max_constraint_steps}-step cap "
                f"with h={h:.3e}; thresholding enforces acyclicity"
            )
            deviations.append(note)
            log.warning(f"seed {seed}: {note}")

        # Cool-down
        boundaries[Phase.COOLDOWN.value] = trainer.step
        weights = adjacency_from_params(model).entries
        active = model.edge_activity()
        dag, _ = threshold_to_dag(WeightedAdjacency(np.where(active, weights, 0.0)))
        for child in range(dim):
            for parent in range(dim):
                if not active[child, parent]:
                    continue
                if (parent, child) in dag.edges:
                    model.restore_initial_theta(parent, child)
                else:
                    model.remove_edge(parent, child, config.frozen_value)
        trainer.reset_optimizer(config.lr_cooldown)
        log.info(f"seed {seed}: cool-down on {dag}")
        elbos: deque[float] = deque(maxlen=config.t_conv)
        for _ in range(config.cooldown_steps):
            terms = trainer.train_step(None, Phase.COOLDOWN)
            elbos.append(float(terms.elbo))

        final_dag = final_threshold(
            model, dag, config.final_linvar_thresh, config.final_theta_thresh
        )
        keep = final_dag.to_matrix().astype(bool)
        adjacency = np.where(keep, adjacency_from_params(model).entries, 0.0)
        final_elbo = float(np.mean(elbos))
        if not np.isfinite(final_elbo):
            raise NumericalError("final bound is not finite", {"seed": seed})
    except NumericalError as exc:
        log.warning(f"seed {seed}: run failed: {exc}")
        return DiscoveryResult.failed(
            seed,
            dim,
            str(exc),
            snapshot,
            subproblems=auglag.subproblem_index,
            h_history=h_history,
            phase_boundaries=boundaries,
            trace=trainer.trace if trainer else [],
            deviations=deviations,
        )

    boundaries["end"] = trainer.step
    log.info(f"seed {seed}: finished with ELBO {final_elbo:.4f} and {final_dag.edge_count} edges")
    return DiscoveryResult(
        seed=seed,
        dim=dim,
        adjacency=adjacency.tolist(),
        edges=final_dag.sorted_edges(),
        final_elbo=final_elbo,
        subproblems=auglag.subproblem_index,
        h_history=h_history,
        phase_boundaries=boundaries,
        trace=trainer.trace,
        deviations=deviations,
        config=snapshot,
    )
