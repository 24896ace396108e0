"""Tests for Adam, natural gradients, the penalty schedule and gradient checks."""

import math

import numpy as np
import pytest
import torch
from torch import nn

from causal_cde.errors import ContractViolation, NumericalError
from causal_cde.gp import DTYPE, VariationalGaussian
from causal_cde.optim import (
    AdamState,
    AugLagState,
    ExpectationGrads,
    adam_step,
    auglag_update,
    expectation_grads,
    flatten_objective,
    grad_check,
    natgrad_step,
)


class TestAdam:
    """Tests for the functional Adam ascent step."""

    def test_zero_gradient_keeps_params(self):
        """Test that a zero gradient moves nothing."""
        p = torch.tensor([1.0, -2.0], dtype=DTYPE)
        state = AdamState.for_params([p], lr=0.1)
        adam_step(state, [p], [torch.zeros(2, dtype=DTYPE)])
        assert torch.equal(p, torch.tensor([1.0, -2.0], dtype=DTYPE))
        assert state.step == 1

    def test_ascends(self):
        """Test that a positive gradient increases the parameter by about lr on step one."""
        p = torch.zeros(1, dtype=DTYPE)
        state = AdamState.for_params([p], lr=0.01)
        adam_step(state, [p], [torch.tensor([3.0], dtype=DTYPE)])
        assert float(p) == pytest.approx(0.01, rel=1e-6)

    def test_constant_gradient_step_tends_to_lr(self):
        """Test the bias-corrected step magnitude after many constant-gradient steps."""
        p = torch.zeros(1, dtype=DTYPE)
        state = AdamState.for_params([p], lr=0.005)
        g = torch.tensor([0.25], dtype=DTYPE)
        for _ in range(9999):
            adam_step(state, [p], [g])
        before = float(p)
        adam_step(state, [p], [g])
        assert float(p) - before == pytest.approx(0.005, rel=0.01)

    def test_mask_freezes_entries(self):
        """Test that masked entries never move."""
        p = torch.zeros(3, dtype=DTYPE)
        state = AdamState.for_params([p], lr=0.1)
        mask = torch.tensor([True, False, True])
        for _ in range(5):
            adam_step(state, [p], [torch.ones(3, dtype=DTYPE)], [mask])
        assert float(p[1]) == 0.0
        assert float(p[0]) > 0.0

    def test_non_finite_gradient(self):
        """Test that NaN gradients raise."""
        p = torch.zeros(1, dtype=DTYPE)
        state = AdamState.for_params([p], lr=0.1)
        with pytest.raises(NumericalError):
            adam_step(state, [p], [torch.tensor([math.nan], dtype=DTYPE)])

    def test_deterministic(self):
        """Test that identical runs give identical trajectories."""
        def run():
            p = torch.zeros(2, dtype=DTYPE)
            state = AdamState.for_params([p], lr=0.05)
            rng = np.random.default_rng(0)
            for _ in range(20):
                adam_step(state, [p], [torch.as_tensor(rng.standard_normal(2))])
            return p

        assert torch.equal(run(), run())


class TestAugLag:
    """Tests for the penalty coefficient schedule."""

    def test_grows_alpha_when_h_stalls(self):
        """Test alpha *= nu when h > gamma * h_prev."""
        state = auglag_update(AugLagState(alpha=1.0, rho=0.0, h_prev=0.4), 0.5)
        assert state.rho == pytest.approx(0.5)
        assert state.alpha == pytest.approx(10.0)
        assert state.subproblem_index == 1
        assert state.h_prev == 0.5

    def test_keeps_alpha_when_h_drops(self):
        """Test alpha unchanged when h <= gamma * h_prev."""
        state = auglag_update(AugLagState(alpha=1.0, rho=0.0, h_prev=0.4), 0.3)
        assert state.rho == pytest.approx(0.3)
        assert state.alpha == 1.0

    def test_zero_h(self):
        """Test that h = 0 leaves both coefficients unchanged."""
        state = auglag_update(AugLagState(alpha=2.0, rho=1.5, h_prev=0.1), 0.0)
        assert state.alpha == 2.0
        assert state.rho == 1.5

    def test_scripted_sequence(self):
        """Test a hand-computed sequence and monotonicity of alpha and rho."""
        state = AugLagState(alpha=1.0, rho=0.0)
        # rho grows by the alpha in force before each update
        hs = [1.0, 0.95, 0.5, 0.5]
        expected = [(1.0, 1.0), (10.0, 1.95), (10.0, 6.95), (100.0, 11.95)]
        for h, (want_alpha, want_rho) in zip(hs, expected):
            previous = state
            state = auglag_update(state, h)
            assert state.alpha == pytest.approx(want_alpha)
            assert state.rho == pytest.approx(want_rho)
            assert state.alpha >= previous.alpha
            assert state.rho >= previous.rho
        assert state.subproblem_index == 4

    def test_negative_h_rejected(self):
        """Test that h < 0 is a contract violation."""
        with pytest.raises(ContractViolation):
            auglag_update(AugLagState(), -0.1)

    def test_penalty(self):
        """Test alpha h^2 + rho h / 2."""
        assert AugLagState(alpha=2.0, rho=3.0).penalty(0.5) == pytest.approx(0.5 + 0.75)


def _quadratic_q():
    """q(u) and the gradients of L = -0.5 (u - b)^T P (u - b) in expectation form."""
    rng = np.random.default_rng(0)
    A = rng.standard_normal((3, 3))
    P = torch.as_tensor(A @ A.T + 3 * np.eye(3), dtype=DTYPE)
    b = torch.as_tensor(rng.standard_normal(3), dtype=DTYPE)
    q = VariationalGaussian(torch.zeros(3, dtype=DTYPE), torch.eye(3, dtype=DTYPE))
    mean = q.mean.clone().requires_grad_(True)
    cov = q.covariance.clone().requires_grad_(True)
    # E_q[-0.5 (u - b)^T P (u - b)] + entropy of q
    value = -0.5 * ((mean - b) @ P @ (mean - b) + torch.trace(P @ cov))
    value = value + 0.5 * torch.logdet(cov)
    grad_mean, grad_cov = torch.autograd.grad(value, [mean, cov])
    return q, expectation_grads(grad_mean, grad_cov, mean.detach()), P, b


class TestNatGrad:
    """Tests for natural-gradient steps on q(u)."""

    def test_zero_step_is_identity(self):
        """Test that step 0 returns q unchanged."""
        q, grads, _, _ = _quadratic_q()
        new = natgrad_step(q, grads, 0.0)
        assert torch.equal(new.mean, q.mean)
        assert torch.equal(new.cov_factor, q.cov_factor)

    def test_unit_step_solves_gaussian_target(self):
        """Test that step 1 lands on N(b, P^-1) for a Gaussian target."""
        q, grads, P, b = _quadratic_q()
        new = natgrad_step(q, grads, 1.0)
        assert torch.allclose(new.mean, b, atol=1e-10)
        assert torch.allclose(new.covariance, torch.linalg.inv(P), atol=1e-10)

    def test_halving_keeps_covariance_pd(self):
        """Test that an overshooting step is halved instead of producing a non-PD covariance."""
        q = VariationalGaussian(torch.zeros(2, dtype=DTYPE), torch.eye(2, dtype=DTYPE))
        grads = ExpectationGrads(torch.zeros(2, dtype=DTYPE), 0.8 * torch.eye(2, dtype=DTYPE))
        new = natgrad_step(q, grads, 1.0)
        assert bool((torch.linalg.eigvalsh(new.covariance) > 0).all())

    def test_persistent_failure(self):
        """Test NumericalError when no halving yields a PD precision."""
        q = VariationalGaussian(torch.zeros(2, dtype=DTYPE), torch.eye(2, dtype=DTYPE))
        grads = ExpectationGrads(torch.zeros(2, dtype=DTYPE), 1e6 * torch.eye(2, dtype=DTYPE))
        with pytest.raises(NumericalError):
            natgrad_step(q, grads, 1.0, max_halvings=2)


class TestGradCheck:
    """Tests for the central finite-difference checker."""

    def test_quadratic_exact(self):
        """Test a quadratic objective against autograd."""
        report = grad_check(lambda x: (x**2).sum() + 3 * x[0] * x[1], np.array([0.3, -1.2, 2.0]))
        assert report.passed
        assert report.max_rel_error < 1e-9

    def test_corrupted_gradient_fails(self):
        """Test that a wrong analytic gradient is caught with its index."""
        def wrong(x):
            g = 2 * x
            g[2] += 1.0
            return g

        report = grad_check(lambda x: (x**2).sum(), np.array([1.0, 2.0, 3.0]), gradient=wrong)
        assert not report.passed
        assert report.worst_index == 2
        assert report.failing_indices() == [2]
        assert report.to_dict()["passed"] is False

    def test_flatten_objective(self):
        """Test checking a module's parameters through one flat vector."""
        layer = nn.Linear(3, 2, dtype=DTYPE)
        X = torch.as_tensor(np.random.default_rng(0).standard_normal((5, 3)), dtype=DTYPE)
        objective, x0 = flatten_objective(layer, lambda: torch.tanh(layer(X)).sum())
        assert x0.numel() == 3 * 2 + 2
        assert float(objective(x0)) == pytest.approx(float(torch.tanh(layer(X)).sum()))
        assert grad_check(objective, x0).passed

    def test_penalty_gradient_identity(self):
        """Test d/dA [alpha h^2 + rho h / 2] = (2 alpha h + rho / 2) dh/dA."""
        from causal_cde.graphs import acyclicity_tensor

        alpha, rho = 3.0, 0.7
        A0 = torch.tensor([[0.0, 0.4, 0.0], [0.3, 0.0, 0.2], [0.5, 0.0, 0.0]], dtype=DTYPE)

        def penalty(x):
            h = acyclicity_tensor(x.reshape(3, 3))
            return AugLagState(alpha=alpha, rho=rho).penalty(h)

        report = grad_check(penalty, A0.reshape(-1))
        assert report.passed

        A = A0.clone().requires_grad_(True)
        h = acyclicity_tensor(A)
        (dh,) = torch.autograd.grad(h, A)
        A = A0.clone().requires_grad_(True)
        (dp,) = torch.autograd.grad(penalty(A.reshape(-1)), A)
        assert torch.allclose(dp, (2 * alpha * float(h) + rho / 2) * dh)

    def test_small_gradient_error_is_relative(self):
        """Test that a 1e-3 relative error on gradients of order 1e-3 is not absorbed."""
        def slightly_off(x):
            return 2e-3 * x * (1.0 + 1e-3)

        report = grad_check(lambda x: 1e-3 * (x**2).sum(), np.array([0.5, 1.0]), gradient=slightly_off)
        assert report.max_abs_error == pytest.approx(2e-6, rel=1e-3)
        assert report.max_rel_error == pytest.approx(1e-3, rel=1e-2)
        assert not report.passed
        assert report.failing_indices() == [0, 1]

    def test_zero_gradient_within_atol(self):
        """Test that round-off around a zero gradient passes on the absolute error."""
        report = grad_check(lambda x: (x[1:] ** 2).sum() + 1e3, np.array([0.7, 0.4]))
        assert report.analytic[0] == 0.0
        assert report.abs_errors[0] <= report.atol
        assert report.passed
