"""Benchmark data generator: parameter asset, covariates, series, masks."""

import hashlib
import json

import numpy as np
import pytest

from femmvarx import (GeneratorSpec, LocalModel, ModelSet, TimeSeriesWithMask,
                      default_regime_path, inject_mcar, load_two_regime_models,
                      make_covariates, make_dataset, make_series, objective,
                      simulate)
from femmvarx.synthetic import _asset_text

ASSET_SHA256 = "e34c218815495a2f5c5eeed10a81d3e1851971671b4befa91178b631624bb66c"


class TestParameterAsset:
    def test_checksum_pins_the_asset(self):
        digest = hashlib.sha256(_asset_text().encode()).hexdigest()
        assert digest == ASSET_SHA256

    def test_spot_values(self):
        theta, x_init = load_two_regime_models()
        assert theta.K == 2 and theta.n_lags_x == 3 and theta.n_lags_u == 3
        assert theta[0].offset.tolist() == [2.0, 6.0, 3.0, -1.0]
        assert theta[1].offset.tolist() == [5.0, 4.0, 1.0, 2.0]
        assert theta[0].interactions[2][3, 0] == 0.9
        assert theta[0].controls[0][1, 1] == 0.7
        assert theta[1].controls[3][3, 3] == 0.008
        assert theta[1].interactions[0][3, 1] == -0.1
        assert x_init[:, 0].tolist() == [0.3, -0.5, 0.2, 0.1]
        assert x_init[:, 2].tolist() == [0.1, -0.9, 0.4, 0.1]

    def test_memory_depth(self):
        theta, _ = load_two_regime_models()
        assert theta.mem == 3
        assert theta.t_st == 4


class TestRegimePath:
    def test_default_blocks_alternate_from_regime_one(self):
        assert default_regime_path(600, 250) == ((1, 1), (251, 2), (501, 1))

    def test_indicator_covers_every_step(self):
        spec = GeneratorSpec(T=1002, seed=0)
        regime = spec.regime_indicator()
        assert regime.shape == (1002,)
        assert set(np.unique(regime)) == {1, 2}
        assert regime[0] == 1 and regime[250] == 2 and regime[500] == 1
        weights = spec.true_weights()
        assert np.array_equal(weights.weights.sum(axis=0), np.ones(1002))

    def test_invalid_paths_rejected(self):
        with pytest.raises(ValueError):
            GeneratorSpec(T=100, regime_path=((2, 1),), seed=0)
        with pytest.raises(ValueError):
            GeneratorSpec(T=100, regime_path=((1, 3),), seed=0)


class TestCovariates:
    def test_noise_free_trend_hits_minus_one_at_the_end(self):
        spec = GeneratorSpec(T=500, sigma_u=0.0, seed=1)
        u = make_covariates(spec)
        assert u[0, -1] == pytest.approx(-1.0, abs=1e-15)
        assert u[0, 0] == pytest.approx(-2.0 / 500 + 1.0, abs=1e-15)

    def test_noise_free_oscillation_zero_at_half_period(self):
        spec = GeneratorSpec(T=200, sigma_u=0.0, seed=2)
        u = make_covariates(spec)
        assert abs(u[1, 74]) <= 1e-12  # t = 75: sin(pi)

    def test_noise_free_modulated_oscillation_formula(self):
        spec = GeneratorSpec(T=150, sigma_u=0.0, seed=3)
        u = make_covariates(spec)
        for t in (5, 60, 149):
            expected = (np.sin(2 * np.pi * t / 200.0)
                        * np.cos(2 * np.pi * t / 40.0
                                 + 0.5 * np.pi * np.sin(2 * np.pi * t / 120.0)))
            assert u[2, t - 1] == pytest.approx(expected, abs=1e-12)

    def test_random_walk_replay_oracle(self):
        spec = GeneratorSpec(T=300, sigma_u=0.5, seed=4)
        u = make_covariates(spec)
        # replay the documented draw order with the same stream
        rng = np.random.default_rng(np.random.SeedSequence(4, spawn_key=(0,)))
        for _ in range(3):
            rng.normal(0.0, spec.sigma_u, spec.T)
        walk = [spec.walk_start]
        for _ in range(spec.T - 1):
            walk.append(walk[-1] + spec.walk_low
                        + (spec.walk_high - spec.walk_low) * rng.random())
        replayed = np.asarray(walk) + rng.normal(0.0, spec.u4_noise_std, spec.T)
        assert np.array_equal(u[3], replayed)

    def test_walk_increments_stay_in_bounds(self):
        spec = GeneratorSpec(T=400, sigma_u=0.0, seed=5)
        u = make_covariates(spec)
        increments = np.diff(u[3])
        assert increments.min() >= spec.walk_low
        assert increments.max() <= spec.walk_high


class TestMakeSeries:
    def test_constant_path_matches_single_model_simulation(self):
        spec = GeneratorSpec(T=60, sigma_x=0.0, seed=6, regime_path=((1, 2),))
        u = make_covariates(spec)
        x, weights = make_series(spec, u)
        assert np.array_equal(weights.hard_assignment(), np.ones(60, dtype=int))
        single = ModelSet([spec.theta[1]])
        direct = simulate(single, np.ones((1, 60)), u, spec.x_init)
        assert np.allclose(x, direct, atol=1e-12)

    def test_offsets_only_reproduce_regime_means(self):
        theta, x_init = load_two_regime_models()
        zeroed = ModelSet([
            LocalModel(m.offset, np.zeros_like(m.interactions), np.zeros_like(m.controls))
            for m in theta
        ])
        spec = GeneratorSpec(T=40, sigma_x=0.0, sigma_u=0.0, seed=7,
                             theta=zeroed, block_length=10)
        x, u, weights = make_dataset(spec)
        regime = spec.regime_indicator()
        mus = {1: [2.0, 6.0, 3.0, -1.0], 2: [5.0, 4.0, 1.0, 2.0]}
        for t in range(4, 41):
            assert x[:, t - 1].tolist() == mus[regime[t - 1]]

    def test_objective_concentrates_at_noise_level(self):
        # residuals of the truth are the injected innovations, so the
        # objective concentrates around (T - mem) * trace(cov) = 999 * 0.02
        totals = []
        for seed in range(10):
            spec = GeneratorSpec(seed=seed)
            x, u, weights = make_dataset(spec)
            totals.append(objective(spec.theta, weights, x, u))
        mean_total = float(np.mean(totals))
        assert 0.8 * 20.04 <= mean_total <= 1.2 * 20.04

    def test_dimensions_and_determinism(self):
        spec = GeneratorSpec(seed=8)
        x1, u1, w1 = make_dataset(spec)
        x2, u2, w2 = make_dataset(GeneratorSpec(seed=8))
        assert x1.shape == (4, 1002) and u1.shape == (4, 1002)
        assert np.array_equal(x1, x2)
        assert np.array_equal(u1, u2)
        assert np.array_equal(w1.weights, w2.weights)
        different = make_dataset(GeneratorSpec(seed=9))[0]
        assert not np.array_equal(x1, different)


class TestInjectMcar:
    def test_zero_fraction_is_identity(self):
        rng = np.random.default_rng(10)
        ts = TimeSeriesWithMask.complete(rng.normal(size=(4, 50)))
        out = inject_mcar(ts, 0.0, seed=1)
        assert not out.mask.any()
        assert np.array_equal(out.values, ts.values)

    def test_exact_count_with_default_protection(self):
        rng = np.random.default_rng(11)
        ts = TimeSeriesWithMask.complete(rng.normal(size=(4, 1002)))
        out = inject_mcar(ts, 0.05, seed=2)
        assert out.n_missing == round(0.05 * 4 * 1000) == 200
        assert not out.mask[:, 0].any()
        assert not out.mask[:, -1].any()
        assert np.isnan(out.values[out.mask]).all()

    def test_extended_protection(self):
        rng = np.random.default_rng(12)
        ts = TimeSeriesWithMask.complete(rng.normal(size=(2, 30)))
        out = inject_mcar(ts, 0.2, protected_times={1, 2, 3, 30}, seed=3)
        assert not out.mask[:, :3].any()
        assert not out.mask[:, -1].any()
        assert out.n_missing == round(0.2 * 2 * 26)

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(13)
        ts = TimeSeriesWithMask.complete(rng.normal(size=(3, 40)))
        a = inject_mcar(ts, 0.3, seed=4)
        b = inject_mcar(ts, 0.3, seed=4)
        assert np.array_equal(a.mask, b.mask)

    def test_invalid_fraction_rejected(self):
        ts = TimeSeriesWithMask.complete(np.zeros((2, 10)))
        with pytest.raises(ValueError):
            inject_mcar(ts, 1.0)
        with pytest.raises(ValueError):
            inject_mcar(ts, -0.1)

    def test_uniformity_over_many_seeds(self):
        ts = TimeSeriesWithMask.complete(np.zeros((4, 1002)))
        counts = np.zeros((4, 1002))
        n_seeds = 200
        for seed in range(n_seeds):
            counts += inject_mcar(ts, 0.1, seed=seed).mask
        eligible = np.ones((4, 1002), dtype=bool)
        eligible[:, 0] = eligible[:, -1] = False
        rates = counts[eligible] / n_seeds
        se = np.sqrt(0.1 * 0.9 / n_seeds)
        assert np.abs(rates - 0.1).max() <= 4.0 * se
        assert counts[~eligible].sum() == 0
