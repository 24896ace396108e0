"""Tests for the additive kernel family and jittered Cholesky."""

import math

import numpy as np
import pytest
import torch

from causal_cde.errors import ContractViolation, NumericalError
from causal_cde.gp import (
    ALL_KERNELS,
    DTYPE,
    MODEL_KERNELS,
    NodeKernelParams,
    dependence_weights,
    eval_kernel,
    jitter_cholesky,
    kernel_diag,
)


def _points(n, dim, seed=0):
    return torch.as_tensor(np.random.default_rng(seed).standard_normal((n, dim)), dtype=DTYPE)


def _random_params(dim, seed=0, enabled=MODEL_KERNELS):
    rng = np.random.default_rng(seed)
    return NodeKernelParams(
        theta={name: torch.as_tensor(rng.uniform(0.1, 2.0, dim)) for name in enabled},
        variance={
            name: torch.tensor(float(rng.uniform(0.5, 2.0)), dtype=DTYPE)
            for name in enabled
            if name != "lin"
        },
        rq_shape=torch.tensor(1.5, dtype=DTYPE),
        enabled=enabled,
    )


class TestEvalKernel:
    """Tests for Gram matrices."""

    @pytest.mark.parametrize("which", ALL_KERNELS)
    def test_symmetric_psd(self, which):
        """Test symmetry and positive semi-definiteness of every kernel."""
        params = _random_params(3, enabled=ALL_KERNELS)
        X = _points(20, 3)
        K = eval_kernel(params, X, X, which)
        assert torch.allclose(K, K.T)
        assert float(torch.linalg.eigvalsh(K).min()) > -1e-9

    def test_sum_is_sum_of_parts(self):
        """Test that 'sum' adds the enabled kernels."""
        params = _random_params(2)
        X = _points(6, 2)
        parts = sum(eval_kernel(params, X, X, name) for name in MODEL_KERNELS)
        assert torch.allclose(eval_kernel(params, X, X), parts)

    def test_one_dimensional_formulas(self):
        """Test each stationary kernel at distance r = 0.7 with theta = 2."""
        U = torch.tensor([[0.0]], dtype=DTYPE)
        V = torch.tensor([[0.7]], dtype=DTYPE)
        params = NodeKernelParams.constant(1, theta=2.0, rq_shape=0.5, enabled=ALL_KERNELS)
        s = 2.0 * 0.7
        expected = {
            "sqe": math.exp(-0.5 * s**2),
            "m12": math.exp(-s),
            "m32": (1 + math.sqrt(3) * s) * math.exp(-math.sqrt(3) * s),
            "m52": (1 + math.sqrt(5) * s + 5 * s**2 / 3) * math.exp(-math.sqrt(5) * s),
            "rq": (1 + s**2 / (2 * 0.5)) ** -0.5,
            "lin": 0.0,
        }
        for name, value in expected.items():
            assert float(eval_kernel(params, U, V, name)) == pytest.approx(value, rel=1e-12)

    def test_linear_kernel(self):
        """Test k_lin(u, v) = sum_d theta_d u_d v_d."""
        params = NodeKernelParams.constant(2, theta={"lin": 0.5}, enabled=("lin",))
        U = torch.tensor([[1.0, 2.0]], dtype=DTYPE)
        V = torch.tensor([[3.0, -1.0]], dtype=DTYPE)
        assert float(eval_kernel(params, U, V)) == pytest.approx(0.5 * (3.0 - 2.0))

    def test_zero_theta_removes_dependence(self):
        """Test that a dimension with all theta zero no longer affects the Gram matrix."""
        params = _random_params(3)
        for name in MODEL_KERNELS:
            params.theta[name][1] = 0.0
        X = _points(10, 3)
        Y = X.clone()
        Y[:, 1] = torch.as_tensor(np.random.default_rng(9).standard_normal(10))
        assert torch.allclose(eval_kernel(params, X, X), eval_kernel(params, Y, Y))

    def test_all_zero_is_constant(self):
        """Test that theta = 0 everywhere gives a constant Gram matrix."""
        params = NodeKernelParams.constant(2, theta=0.0)
        K = eval_kernel(params, _points(5, 2), _points(4, 2, seed=1))
        assert torch.allclose(K, torch.full_like(K, K[0, 0].item()))

    def test_diag_matches_gram(self):
        """Test kernel_diag against the Gram matrix diagonal."""
        params = _random_params(3)
        X = _points(7, 3)
        assert torch.allclose(kernel_diag(params, X), torch.diagonal(eval_kernel(params, X, X)))

    def test_validation(self):
        """Test negative theta, wrong widths and unknown selectors."""
        params = _random_params(2)
        with pytest.raises(ContractViolation):
            eval_kernel(params, _points(3, 3), _points(3, 3))
        with pytest.raises(ContractViolation):
            eval_kernel(params, _points(3, 2), _points(3, 2), "cosine")
        params.theta["sqe"][0] = -1.0
        with pytest.raises(ContractViolation):
            eval_kernel(params, _points(3, 2), _points(3, 2))


class TestDependenceWeights:
    """Tests for the per-input theta sums behind the adjacency."""

    def test_sums_and_latent_split(self):
        """Test that the latent dimension is reported separately."""
        params = NodeKernelParams.constant(3, theta=0.2)
        weights = dependence_weights(params)
        assert weights.observed.shape == (2,)
        assert torch.allclose(weights.observed, torch.full((2,), 1.0, dtype=DTYPE))
        assert float(weights.latent) == pytest.approx(1.0)

    def test_m52_excluded(self):
        """Test that the data-generation-only kernel never reaches the adjacency."""
        params = NodeKernelParams.constant(2, theta={"m52": 3.0}, enabled=ALL_KERNELS)
        assert float(dependence_weights(params).observed.sum()) == 0.0


class TestJitterCholesky:
    """Tests for Cholesky with bounded jitter escalation."""

    def test_factorizes(self):
        """Test L L^T = K + jitter I on a well-conditioned matrix."""
        A = _points(5, 5)
        K = A @ A.T + torch.eye(5, dtype=DTYPE)
        L = jitter_cholesky(K, 1e-6)
        assert torch.allclose(L @ L.T, K + 1e-6 * torch.eye(5, dtype=DTYPE))

    def test_escalates_on_singular(self):
        """Test that a rank-one matrix succeeds after escalation."""
        v = torch.ones(4, 1, dtype=DTYPE)
        L = jitter_cholesky(v @ v.T, jitter=0.0)
        assert bool(torch.isfinite(L).all())

    def test_gives_up(self):
        """Test NumericalError with diagnostics on an indefinite matrix."""
        K = torch.tensor([[1.0, 0.0], [0.0, -5.0]], dtype=DTYPE)
        with pytest.raises(NumericalError) as excinfo:
            jitter_cholesky(K, 1e-6)
        assert excinfo.value.diagnostics["size"] == 2
