import numpy as np
import numpy.testing as npt
import pytest

from jadce import _kernels_py, kernels
from jadce.errors import ConfigError
from jadce.solvers import (
    admm_block_update,
    aladin_block_update,
    local_step,
    soft_threshold,
)

from conftest import small_problem


def rand_blocks(rng, n, m):
    return np.ascontiguousarray(rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m)))


class TestSoftThreshold:
    def test_zero_weight_is_identity(self):
        a = np.array([0.3, -1.2, 4.0])
        npt.assert_array_equal(soft_threshold(a, 0.0), a)
        npt.assert_array_equal(soft_threshold(np.zeros(3), 0.0), np.zeros(3))

    def test_full_shrinkage(self):
        npt.assert_array_equal(soft_threshold(np.array([1.0, 0.0]), 2.0), [0.0, 0.0])

    def test_partial_shrinkage(self):
        npt.assert_allclose(soft_threshold(np.array([3.0, 4.0]), 1.0), [2.4, 3.2], atol=1e-15)

    def test_negative_weight_rejected(self):
        with pytest.raises(ConfigError):
            soft_threshold(np.ones(2), -0.1)


class TestBackends:
    def test_prox_step_dual_matches_reference(self, kernel_backend):
        rng = np.random.default_rng(0)
        z = rand_blocks(rng, 50, 6)
        at = rand_blocks(rng, 50, 6)
        xi = np.empty_like(z)
        ref_xi = np.empty_like(z)
        got = kernels.prox_step_dual(z, at, 0.7, 1.2, xi)
        want = _kernels_py.prox_step_dual(z, at, 0.7, 1.2, ref_xi)
        assert got == pytest.approx(want, rel=1e-12)
        npt.assert_allclose(xi, ref_xi, atol=1e-13)

    def test_prox_step_point_matches_reference(self, kernel_backend):
        rng = np.random.default_rng(1)
        p = rand_blocks(rng, 40, 5)
        prev = rand_blocks(rng, 40, 5)
        xi = np.empty_like(p)
        ref_xi = np.empty_like(p)
        got = kernels.prox_step_point(p, 0.9, prev, xi)
        want = _kernels_py.prox_step_point(p, 0.9, prev, ref_xi)
        assert got[0] == pytest.approx(want[0], rel=1e-12)
        assert got[1] == pytest.approx(want[1], rel=1e-12)
        npt.assert_allclose(xi, ref_xi, atol=1e-13)

    def test_block_norms_matches_reference(self, kernel_backend):
        rng = np.random.default_rng(2)
        x = rand_blocks(rng, 30, 7)
        out = np.empty(30)
        ref = np.empty(30)
        kernels.block_norms(x, out)
        _kernels_py.block_norms(x, ref)
        npt.assert_allclose(out, ref, atol=1e-13)

    def test_prox_pins_small_blocks_to_exact_zero(self, kernel_backend):
        rng = np.random.default_rng(3)
        z = rand_blocks(rng, 10, 4) * 1e-3
        xi = np.empty_like(z)
        kernels.prox_step_dual(z, np.zeros_like(z), 1.0, 10.0, xi)
        npt.assert_array_equal(xi, np.zeros_like(z))

    def test_shrink_factor_edge_at_zero_norm(self, kernel_backend):
        z = np.zeros((3, 2), dtype=complex)
        xi = np.empty_like(z)
        step = kernels.prox_step_dual(z, np.zeros_like(z), 1.0, 0.0, xi)
        npt.assert_array_equal(xi, z)
        assert step == 0.0


class TestLocalStep:
    def test_zero_state_is_fixed_point(self):
        _, p = small_problem(seed=3)
        lam = np.zeros(p.op.shape[0])
        xi_i, w_i = local_step(np.zeros(p.op.block_size), lam, 0, p.gamma, 0.8 * p.gamma, p.op)
        npt.assert_array_equal(xi_i, np.zeros_like(xi_i))
        npt.assert_array_equal(w_i, np.zeros_like(w_i))

    def test_dominating_threshold_sends_message_of_z(self):
        _, p = small_problem(seed=4)
        rng = np.random.default_rng(0)
        z_i = 1e-6 * rng.standard_normal(p.op.block_size)
        lam = np.zeros(p.op.shape[0])
        xi_i, w_i = local_step(z_i, lam, 1, p.gamma, 0.8 * p.gamma, p.op)
        npt.assert_array_equal(xi_i, np.zeros_like(xi_i))
        npt.assert_allclose(w_i, p.op.block_matvec(1, z_i), atol=1e-18)

    def test_subgradient_certificate(self):
        _, p = small_problem(seed=5)
        rng = np.random.default_rng(1)
        rho = 0.8 * p.gamma
        for i in (0, 3, 7):
            z_i = rng.standard_normal(p.op.block_size)
            lam = rng.standard_normal(p.op.shape[0])
            xi_i, _ = local_step(z_i, lam, i, p.gamma, rho, p.op)
            g = rho * (z_i - xi_i) + p.op.block_rmatvec(i, lam)
            assert np.linalg.norm(g) <= p.gamma + 1e-10
            if np.linalg.norm(xi_i) > 0:
                npt.assert_allclose(
                    g, p.gamma * xi_i / np.linalg.norm(xi_i), atol=1e-10
                )


class TestBlockUpdates:
    def test_update_difference_is_momentum_term(self):
        rng = np.random.default_rng(2)
        z, xi, at_d = rng.standard_normal((3, 8))
        delta = aladin_block_update(z, xi, at_d, 0.8) - admm_block_update(z, xi, at_d, 0.8)
        npt.assert_allclose(delta, xi - z, rtol=1e-12, atol=1e-12)
