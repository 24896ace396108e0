"""Tests for the training objective and both discovery drivers."""

import math

import numpy as np
import pytest
import scipy.stats
import torch

from causal_cde.discovery import (
    CgpCdeModel,
    DiscoveryResult,
    Phase,
    RunStatus,
    adjacency_from_params,
    check_data,
    final_threshold,
    fit_discrete,
    fit_discrete_detailed,
    fit_node,
    gradient_suite,
    initial_alpha,
    log_prior_theta,
    loss_breakdown,
    run_restarts,
    select_best,
    select_discrete,
    subproblem_converged,
    train_continuous,
    training_loss,
)
from causal_cde.errors import (
    AllRestartsFailed,
    ContractViolation,
    EnumerationCapError,
    NumericalError,
)
from causal_cde.gp import DTYPE
from causal_cde.graphs import Dag, is_acyclic
from causal_cde.optim import AugLagState


def _small_model(dim=3, n=20, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, dim))
    X = (X - X.mean(axis=0)) / X.std(axis=0)
    model = CgpCdeModel(dim, 5, encoder_hidden=4, encoder_layers=2, rng=rng)
    model.initialize(X, rng)
    return model, torch.as_tensor(X, dtype=DTYPE)


def _pair_data(n=40, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    y = 0.9 * x + 0.2 * rng.standard_normal(n)
    X = np.column_stack([x, y])
    return (X - X.mean(axis=0)) / X.std(axis=0)


class TestLogPrior:
    """Tests for the Gamma prior on kernel hyperparameters."""

    def test_exponential_case(self):
        """Test log Gamma(0.1 | 1, 10) = ln 10 - 1."""
        value = log_prior_theta(torch.tensor([0.1], dtype=DTYPE), shape=1.0, rate=10.0)
        assert float(value) == pytest.approx(math.log(10.0) - 1.0, rel=1e-12)

    def test_float_for_array_input(self):
        """Test that non-tensor input returns a plain float summed over entries."""
        value = log_prior_theta([0.1, 0.2])
        assert isinstance(value, float)
        assert value == pytest.approx(2 * math.log(10.0) - 3.0)

    def test_general_shape(self):
        """Test agreement with scipy for shape != 1."""
        theta = np.array([0.05, 0.4, 2.0])
        expected = scipy.stats.gamma.logpdf(theta, a=2.5, scale=1 / 4.0).sum()
        assert log_prior_theta(theta, shape=2.5, rate=4.0) == pytest.approx(expected, rel=1e-10)

    def test_negative_rejected(self):
        """Test that negative theta is a contract violation."""
        with pytest.raises(ContractViolation):
            log_prior_theta([-0.1])


class TestTrainingObjective:
    """Tests for the penalized objective and the graph view of the model."""

    def test_no_penalty_is_elbo_plus_prior(self):
        """Test loss = ELBO + log prior when the penalty is off."""
        model, X = _small_model()
        terms = loss_breakdown(model, X, 20, 3, None, 5)
        assert float(terms.penalty) == 0.0
        assert float(terms.loss) == pytest.approx(float(terms.elbo + terms.log_prior), rel=1e-12)
        assert float(terms.log_prior) == pytest.approx(log_prior_theta(model.theta_vector().detach()))

    def test_penalty_terms(self):
        """Test loss = ELBO + log prior - alpha h^2 - rho h / 2."""
        model, X = _small_model()
        auglag = AugLagState(alpha=2.0, rho=3.0)
        terms = loss_breakdown(model, X, 20, 3, auglag, 5)
        h = float(terms.h)
        assert h > 0.0
        expected = float(terms.elbo + terms.log_prior) - (2.0 * h**2 + 1.5 * h)
        assert float(terms.loss) == pytest.approx(expected, rel=1e-10)

    def test_integer_seed_is_reproducible(self):
        """Test that an integer seed fixes the Monte-Carlo draws."""
        model, X = _small_model()
        a = training_loss(model, X, 20, None, 11, mc_samples=3)
        b = training_loss(model, X, 20, None, 11, mc_samples=3)
        assert float(a) == float(b)

    def test_column_mismatch(self):
        """Test that a batch with the wrong width is refused."""
        model, X = _small_model()
        with pytest.raises(ContractViolation):
            training_loss(model, X[:, :2], 20, None, 0)

    def test_adjacency_from_theta_sums(self):
        """Test A_ij = summed theta of node i on input j, with a zero diagonal."""
        model, _ = _small_model()
        A = adjacency_from_params(model).entries
        assert np.all(np.diag(A) == 0.0)
        node = model.nodes[2]
        k = node.input_cols.index(0)
        expected = sum(float(node.theta(name)[k]) for name in node.kernels)
        assert A[2, 0] == pytest.approx(expected)

    def test_remove_edge_freezes_input(self):
        """Test that a removed edge is pinned and no longer trainable."""
        model, _ = _small_model()
        model.remove_edge(0, 1, 1e-15)
        assert not model.edge_activity()[1, 0]
        assert adjacency_from_params(model).entries[1, 0] == pytest.approx(0.0, abs=1e-12)

    def test_final_threshold(self):
        """Test that an edge survives only through its linear or summed theta."""
        model, _ = _small_model(dim=2)
        dag = Dag.from_edges(2, [(0, 1)])
        node = model.nodes[1]
        for name in node.kernels:
            node.set_theta(name, 1e-5)
        assert final_threshold(model, dag).edge_count == 0
        node.set_theta("lin", 0.5)
        assert final_threshold(model, dag).sorted_edges() == [(0, 1)]
        node.set_theta("lin", 1e-6)
        node.set_theta("sqe", 0.2)
        assert final_threshold(model, dag).sorted_edges() == [(0, 1)]


class TestScheduleHelpers:
    """Tests for convergence detection and penalty scaling."""

    def test_window_not_full(self):
        """Test that a short history never counts as converged."""
        assert not subproblem_converged([1.0, 1.0, 1.0], t_conv=4)

    def test_noisy_plateau_converged(self):
        """Test that an oscillating plateau is converged."""
        assert subproblem_converged([1.0, -1.0] * 5, t_conv=10)

    def test_jump_not_converged(self):
        """Test that a recent jump is not converged."""
        assert not subproblem_converged([0.0] * 5 + [10.0] * 5, t_conv=10)

    def test_initial_alpha(self):
        """Test alpha0 = fraction * |ELBO| / h^2 and the acyclic fallback."""
        assert initial_alpha(-200.0, 0.5, 0.05) == pytest.approx(40.0)
        assert initial_alpha(-200.0, 0.0, 0.05) == 1.0

    def test_check_data(self):
        """Test shape and finiteness checks."""
        with pytest.raises(ContractViolation):
            check_data(np.zeros(5))
        with pytest.raises(ContractViolation):
            check_data(np.zeros((1, 3)))
        with pytest.raises(ContractViolation):
            check_data(np.array([[0.0, np.inf], [1.0, 2.0]]))
        raw = np.array([[1.0, 5.0], [3.0, 9.0]])
        assert np.array_equal(check_data(raw), raw)


class TestContinuousDriver:
    """Tests for one seeded run of the continuous relaxation."""

    def test_run_produces_dag(self, chain_data, tiny_config):
        """Test the result structure of a short run."""
        result = train_continuous(chain_data, tiny_config, seed=0)
        assert result.succeeded
        assert result.dim == 3
        assert math.isfinite(result.final_elbo)
        A = np.array(result.adjacency)
        assert A.shape == (3, 3)
        assert np.all(np.diag(A) == 0.0)
        assert is_acyclic(A, 0.0)
        for parent, child in result.edges:
            assert A[child, parent] > 0.0
        assert np.count_nonzero(A) == len(result.edges)
        assert set(result.phase_boundaries) == {"warmup", "constraint", "cooldown", "end"}
        assert result.trace
        assert all(record.step % tiny_config.trace_every == 0 for record in result.trace)
        assert result.trace[0].phase is Phase.WARMUP
        assert result.config == tiny_config.model_dump(mode="json")

    def test_deterministic(self, chain_data, tiny_config):
        """Test that a seed fixes the run."""
        a = train_continuous(chain_data, tiny_config, seed=4)
        b = train_continuous(chain_data, tiny_config, seed=4)
        assert a.edges == b.edges
        assert a.final_elbo == b.final_elbo

    def test_numerical_failure_becomes_failed_result(self, chain_data, tiny_config, monkeypatch):
        """Test that a NumericalError ends the run with a failed result."""
        def boom(*args, **kwargs):
            raise NumericalError("objective blew up")

        monkeypatch.setattr("causal_cde.discovery.continuous.loss_breakdown", boom)
        result = train_continuous(chain_data, tiny_config, seed=0)
        assert result.status is RunStatus.FAILED
        assert "objective blew up" in result.error
        assert result.final_elbo is None
        assert np.array(result.adjacency).shape == (3, 3)

    def test_alpha0_uses_warmup_bound(self, chain_data, tiny_config, monkeypatch):
        """Test that alpha0 comes from the last warm-up bounds and the post-warm-up h."""
        from causal_cde.discovery import continuous

        elbos: list[float] = []
        calls: list[tuple[int, float, float]] = []
        original_step = continuous._Trainer.train_step
        original_alpha = continuous.initial_alpha

        def recording_step(self, auglag, phase):
            terms = original_step(self, auglag, phase)
            if phase is Phase.WARMUP:
                assert auglag.alpha == 0.0
                elbos.append(float(terms.elbo))
            return terms

        def recording_alpha(elbo, h, fraction):
            calls.append((len(elbos), elbo, h))
            return original_alpha(elbo, h, fraction)

        monkeypatch.setattr(continuous._Trainer, "train_step", recording_step)
        monkeypatch.setattr(continuous, "initial_alpha", recording_alpha)
        result = train_continuous(chain_data, tiny_config, seed=0)

        assert result.succeeded
        [(steps_done, elbo, h)] = calls
        assert steps_done == tiny_config.warmup_steps
        assert elbo == pytest.approx(np.mean(elbos[-tiny_config.t_conv :]))
        assert h >= 0.0


class TestRestarts:
    """Tests for seeded restarts and best-restart selection."""

    def _result(self, seed, elbo, failed=False):
        if failed:
            return DiscoveryResult.failed(seed, 2, "diverged")
        return DiscoveryResult(seed=seed, dim=2, final_elbo=elbo)

    def test_select_best(self):
        """Test highest bound wins, ties go to the smaller seed, failures are skipped."""
        results = [
            self._result(3, -10.0),
            self._result(1, -10.0),
            self._result(0, 5.0, failed=True),
            self._result(2, -12.0),
        ]
        assert select_best(results).seed == 1

    def test_all_failed(self):
        """Test AllRestartsFailed carries every seed's reason."""
        with pytest.raises(AllRestartsFailed) as excinfo:
            select_best([self._result(0, 0.0, failed=True), self._result(1, 0.0, failed=True)])
        assert set(excinfo.value.errors) == {0, 1}

    def test_seed_validation(self, chain_data, tiny_config):
        """Test that seeds must be non-empty and unique."""
        with pytest.raises(ContractViolation):
            run_restarts(chain_data, tiny_config, [])
        with pytest.raises(ContractViolation):
            run_restarts(chain_data, tiny_config, [0, 0])

    def test_results_in_seed_order(self, chain_data, tiny_config):
        """Test that results come back in seed order and the best is among them."""
        seen = []
        best, results = run_restarts(
            chain_data, tiny_config, [5, 2], workers=2, on_result=lambda r: seen.append(r.seed)
        )
        assert [r.seed for r in results] == [5, 2]
        assert sorted(seen) == [2, 5]
        assert best.seed in (2, 5)
        assert best.final_elbo == max(r.final_elbo for r in results if r.succeeded)

    def test_raising_restart_is_recorded(self, chain_data, tiny_config, monkeypatch):
        """Test that an exception in one restart is recorded and the others still count."""
        from causal_cde.discovery import restarts

        real = restarts.train_continuous

        def flaky(data, config, seed):
            if seed == 1:
                raise RuntimeError("worker crashed")
            return real(data, config, seed)

        monkeypatch.setattr(restarts, "train_continuous", flaky)
        best, results = run_restarts(chain_data, tiny_config, [0, 1])
        assert best.seed == 0
        assert results[1].status is RunStatus.FAILED
        assert "worker crashed" in results[1].error


class TestDiscreteDriver:
    """Tests for per-node fits and exhaustive ranking."""

    def test_fit_node_deterministic(self, tiny_config):
        """Test that a (node, parents, seed) fit is reproducible and finite."""
        X = _pair_data()
        a = fit_node(X, 1, (0,), tiny_config, seed=0)
        b = fit_node(X, 1, [0], tiny_config, seed=0)
        assert a.succeeded
        assert a.elbo == b.elbo
        assert a.parents == (0,)

    def test_detailed_fit_sums_nodes(self, tiny_config):
        """Test that a graph's bound is the sum of its node bounds."""
        X = _pair_data()
        fit = fit_discrete_detailed(X, Dag.from_edges(2, [(0, 1)]), tiny_config, seed=0)
        assert fit.succeeded
        assert fit.elbo == pytest.approx(sum(fit.node_elbos))
        assert fit_discrete(X, Dag.from_edges(2, [(0, 1)]), tiny_config, seed=0) == fit.elbo

    def test_dim_mismatch(self, chain3, tiny_config):
        """Test that the graph must match the data width."""
        with pytest.raises(ContractViolation):
            fit_discrete(_pair_data(), chain3, tiny_config, seed=0)

    def test_disabled_quasi_newton_is_noted(self, tiny_config):
        """Test that switching off the quasi-Newton stage is recorded as a deviation."""
        config = tiny_config.model_copy(update={"use_bfgs": False})
        fit = fit_node(_pair_data(), 0, (), config, seed=0)
        assert fit.deviations

    def test_select_discrete_ranks_all_graphs(self, tiny_config):
        """Test ranking, ordering and shared node fits on two variables."""
        progress = []
        ranking = select_discrete(
            _pair_data(), tiny_config, on_progress=lambda done, total: progress.append((done, total))
        )
        assert len(ranking) == 3
        assert len({r.dag for r in ranking}) == 3
        elbos = [r.elbo for r in ranking]
        assert elbos == sorted(elbos, reverse=True)
        assert all(math.isfinite(e) for e in elbos)
        # two nodes, each with parents () or the other node
        assert progress[-1] == (4, 4)

    def test_cap(self, tiny_config):
        """Test that five variables exceed the enumeration cap."""
        rng = np.random.default_rng(0)
        with pytest.raises(EnumerationCapError):
            select_discrete(rng.standard_normal((10, 5)), tiny_config)


class TestGradientSuite:
    """Tests for the finite-difference gradient suite."""

    def test_small_suite_passes(self):
        """Test both objectives on a few random problems."""
        cases = gradient_suite(n=12, dim=2, num_inducing=4, mc_samples=3, trials=2)
        assert [c.objective for c in cases] == ["node_elbo", "training_loss"] * 2
        for case in cases:
            assert case.passed, case.report.to_dict()
