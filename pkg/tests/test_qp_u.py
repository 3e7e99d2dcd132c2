"""Covariate-side quadratic program, mirroring the series-side contracts."""

import numpy as np
import pytest

from femmvarx import (LocalModel, ModelSet, assemble_block_u, assemble_qp_u,
                      assemble_qp_x, objective, reduce_qp, solve_missing)
from femmvarx.qp_x import ReductionMaps

from conftest import random_model_set, random_weights


def quad_value(qp, v):
    return float(v @ (qp.H @ v) + qp.f @ v)


def random_instance(seed, dimx=2, dimu=2, T=30, K=2, q_lags=1, p_lags=1):
    rng = np.random.default_rng(seed)
    models = random_model_set(rng, K=K, dimx=dimx, dimu=dimu,
                              q_lags=q_lags, p_lags=p_lags, scale=0.4)
    x = rng.normal(size=(dimx, T))
    u = rng.normal(size=(dimu, T))
    weights = random_weights(rng, K, T)
    return rng, models, x, u, weights


class TestAssembleBlock:
    def test_zero_controls_make_covariates_irrelevant(self):
        rng = np.random.default_rng(0)
        models = random_model_set(rng, K=2, dimx=2, dimu=3, q_lags=1, p_lags=2)
        zeroed = ModelSet([LocalModel(m.offset, m.interactions, np.zeros_like(m.controls))
                           for m in models])
        Dt, Gt = assemble_block_u(zeroed, [0.3, 0.7], rng.normal(size=4))
        assert np.array_equal(Dt, np.zeros((9, 9)))
        assert np.array_equal(Gt, np.zeros(9))

    def test_identity_control_gives_identity_gram(self):
        model = LocalModel(np.zeros(3), np.zeros((0, 3, 3)), np.eye(3)[None])
        models = ModelSet([model])
        Dt, _ = assemble_block_u(models, [1.0], np.zeros(3))
        assert np.array_equal(Dt, np.eye(3))

    def test_hand_example_one_dimensional(self):
        # X_{t-1} = 1, X_t = 3, one lag 0.5, control 2:
        # D_t = 4 and G_t = 2 * (3*(-1) + 1*0.5) * 2 = -10
        model = LocalModel([0.0], [[[0.5]]], [[[2.0]]])
        models = ModelSet([model])
        Dt, Gt = assemble_block_u(models, [1.0], np.array([3.0, 1.0]))
        assert Dt == pytest.approx(np.array([[4.0]]))
        assert Gt == pytest.approx(np.array([-10.0]))

    def test_both_published_writings_agree(self):
        # the derivation writes the linear block as -2 Bhat^T Ahat Xhat with
        # Ahat = (-mu, I, -A_1, ..., -A_Q); the summary formula carries +2 and
        # the negated stack; both must coincide
        rng = np.random.default_rng(1)
        for _ in range(10):
            mu = rng.normal()
            a1 = rng.normal()
            b0 = rng.normal()
            x_t, x_tm1 = rng.normal(size=2)
            model = LocalModel([mu], [[[a1]]], [[[b0]]])
            models = ModelSet([model])
            _, Gt = assemble_block_u(models, [1.0], np.array([x_t, x_tm1]))
            x_hat = np.array([1.0, x_t, x_tm1])
            a_hat = np.array([-mu, 1.0, -a1])
            b_hat = np.array([[b0]])
            derivation = -2.0 * b_hat.T @ (a_hat[None, :] @ x_hat[:, None]).ravel()
            summary = 2.0 * x_hat @ np.array([[mu], [-1.0], [a1]]) @ b_hat
            assert Gt == pytest.approx(derivation, rel=1e-12)
            assert Gt == pytest.approx(summary.ravel(), rel=1e-12)

    def test_blocks_are_positive_semidefinite(self):
        for seed in range(5):
            rng, models, x, u, weights = random_instance(seed, q_lags=1, p_lags=2)
            x_window = np.concatenate([x[:, 6], x[:, 5]])
            Dt, _ = assemble_block_u(models, weights[:, 6], x_window)
            eigs = np.linalg.eigvalsh(Dt)
            assert eigs.min() >= -1e-8 * max(np.abs(eigs).max(), 1.0)


class TestAssembleQP:
    def test_single_contributing_step_is_one_window(self):
        rng, models, x, u, weights = random_instance(2, T=2)
        qp = assemble_qp_u(models, weights, x, u)
        Dt, Gt = assemble_block_u(models, weights[:, 1], np.concatenate([x[:, 1], x[:, 0]]))
        assert np.allclose(qp.dense(), Dt, atol=1e-14)
        assert np.allclose(qp.f, Gt, atol=1e-14)

    def test_difference_oracle_against_objective(self):
        for seed in range(5):
            rng, models, x, u, weights = random_instance(seed + 10)
            qp = assemble_qp_u(models, weights, x, u)
            u2 = u + rng.normal(size=u.shape)
            direct = objective(models, weights, x, u) - objective(models, weights, x, u2)
            via_qp = quad_value(qp, u.T.ravel()) - quad_value(qp, u2.T.ravel())
            assert direct == pytest.approx(via_qp, rel=1e-8)

    def test_band_structure_is_exact(self):
        rng, models, x, u, weights = random_instance(3, T=25, p_lags=2)
        qp = assemble_qp_u(models, weights, x, u)
        dense = qp.dense()
        bandwidth = 2 * (2 + 1)  # dimu * (P + 1)
        ii, jj = np.nonzero(dense)
        assert np.abs(ii - jj).max() < bandwidth
        outside = np.triu(np.ones_like(dense, dtype=bool), k=bandwidth)
        assert np.array_equal(dense[outside], np.zeros(outside.sum()))

    def test_assembly_linear_in_weights(self):
        rng, models, x, u, w1 = random_instance(4)
        w2 = random_weights(rng, 2, 30)
        qp1 = assemble_qp_u(models, w1, x, u)
        qp2 = assemble_qp_u(models, w2, x, u)
        qp_mean = assemble_qp_u(models, 0.5 * (w1 + w2), x, u)
        assert np.allclose((0.5 * (qp1.H + qp2.H) - qp_mean.H).toarray(), 0.0, atol=1e-12)
        assert np.allclose(0.5 * (qp1.f + qp2.f), qp_mean.f, atol=1e-12)

    def test_cross_symmetry_of_band_patterns(self):
        # with dimx = dimu and Q = P the two assemblies expose the same band
        rng, models, x, u, weights = random_instance(5, dimx=3, dimu=3,
                                                     q_lags=2, p_lags=2, T=20)
        qp_x_side = assemble_qp_x(models, weights, x, u)
        qp_u_side = assemble_qp_u(models, weights, x, u)
        assert qp_x_side.H.shape == qp_u_side.H.shape
        band_x = np.abs(np.subtract(*np.nonzero(qp_x_side.dense()))).max()
        band_u = np.abs(np.subtract(*np.nonzero(qp_u_side.dense()))).max()
        assert band_x == band_u

    def test_incomplete_series_rejected(self):
        rng, models, x, u, weights = random_instance(6)
        x[1, 3] = np.nan
        with pytest.raises(ValueError):
            assemble_qp_u(models, weights, x, u)


class TestReduceAndSolve:
    def test_no_missing_covariates_degenerate(self):
        rng, models, x, u, weights = random_instance(7)
        qp = assemble_qp_u(models, weights, x, u)
        maps = ReductionMaps.from_mask(np.zeros_like(u, dtype=bool))
        red = reduce_qp(qp, maps, u.T.ravel())
        assert red.n == 0

    def test_large_ridge_shrinks_reconstruction(self):
        rng, models, x, u, weights = random_instance(8)
        mask = rng.random(u.shape) < 0.2
        mask[0, 10] = True
        qp = assemble_qp_u(models, weights, x, u)
        maps = ReductionMaps.from_mask(mask)
        flat = u.T.ravel()
        red = reduce_qp(qp, maps, flat[maps.observed_indices])
        base = solve_missing(red, ridge=0.005)
        shrunk = solve_missing(red, ridge=1e6)
        assert np.linalg.norm(shrunk) <= 1e-4 * max(np.linalg.norm(base), 1e-12)

    def test_descent_property_with_default_ridge(self):
        for seed in range(6):
            rng, models, x, u, weights = random_instance(seed + 20)
            mask = rng.random(u.shape) < 0.15
            if not mask.any():
                continue
            qp = assemble_qp_u(models, weights, x, u)
            maps = ReductionMaps.from_mask(mask)
            flat = u.T.ravel()
            red = reduce_qp(qp, maps, flat[maps.observed_indices])
            x0 = flat[maps.missing_indices]
            for ridge in (0.0, 0.005):
                sol = solve_missing(red, ridge=ridge, x0=x0)
                penalized_before = quad_value(red, x0) + ridge * float(x0 @ x0)
                penalized_after = quad_value(red, sol) + ridge * float(sol @ sol)
                assert penalized_after <= penalized_before + 1e-9 * (1 + abs(penalized_before))

    def test_reduction_consistency_on_value_differences(self):
        rng, models, x, u, weights = random_instance(9)
        mask = rng.random(u.shape) < 0.25
        mask[1, 4] = True
        qp = assemble_qp_u(models, weights, x, u)
        maps = ReductionMaps.from_mask(mask)
        flat = u.T.ravel()
        red = reduce_qp(qp, maps, flat[maps.observed_indices])
        m1 = rng.normal(size=maps.missing_indices.size)
        m2 = rng.normal(size=maps.missing_indices.size)
        ua, ub = flat.copy(), flat.copy()
        ua[maps.missing_indices] = m1
        ub[maps.missing_indices] = m2
        full_diff = (objective(models, weights, x, ua.reshape(30, 2).T)
                     - objective(models, weights, x, ub.reshape(30, 2).T))
        red_diff = quad_value(red, m1) - quad_value(red, m2)
        assert full_diff == pytest.approx(red_diff, rel=1e-8)

    def test_zero_noise_reconstruction_and_descent(self):
        from femmvarx import GeneratorSpec, TimeSeriesWithMask, inject_mcar, make_dataset
        spec = GeneratorSpec(T=120, sigma_x=0.0, sigma_u=0.0, seed=6)
        x, u, weights = make_dataset(spec)
        ts = inject_mcar(TimeSeriesWithMask.complete(u), 0.05, seed=10)
        qp = assemble_qp_u(spec.theta, weights, x, np.nan_to_num(ts.values))
        maps = ReductionMaps.from_mask(ts.mask)
        flat_true = u.T.ravel()
        red = reduce_qp(qp, maps, flat_true[maps.observed_indices])
        sol, info = solve_missing(red, ridge=0.0, return_info=True)
        # reconstruction error tracks the conditioning of the reduced system
        err = np.abs(sol - flat_true[maps.missing_indices]).max()
        assert err <= max(1e-6, info['cond_est'] * 1e-12)
