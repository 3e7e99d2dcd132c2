"""Synthetic two-regime benchmark data: covariates, series and MCAR masks.

The covariates combine a linear trend, two oscillations and a bounded
random walk, each disturbed by Gaussian noise:

    u1(t) = -2t/T + 1 + eta
    u2(t) = sin(2 pi t / 150) + eta
    u3(t) = sin(2 pi t / 200) * cos(2 pi t / 40 + (pi/2) sin(2 pi t / 120)) + eta
    u4(t) = omega(t) + eta,  omega(t) = omega(t-1) + a + (b - a) * rand

with eta ~ N(0, sigma_u^2).  The target series follows the two-regime
mixture VARX recursion with the checked-in parameter set, a hard regime
path, innovation covariance sigma_x * I and fixed starting columns.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .core import LocalModel, ModelSet, SwitchingWeights, TimeSeriesWithMask, simulate

_ASSET = "two_regime_varx.json"


def _asset_text():
    return resources.files("femmvarx.data").joinpath(_ASSET).read_text()


def load_two_regime_models():
    """The checked-in two-regime parameter set and the starting columns.

    Returns
    -------
    (ModelSet, ndarray (4, 3))
    """
    payload = json.loads(_asset_text())
    models = [LocalModel(m["offset"], m["interactions"], m["controls"])
              for m in payload["models"]]
    x_init = np.array(payload["x_init_columns"], dtype=float).T
    return ModelSet(models), x_init


def default_regime_path(T, block_length=250, n_regimes=2):
    """Alternating regime blocks starting in regime 1: ((1, 1), (251, 2), ...)."""
    if T < 1 or block_length < 1:
        raise ValueError("T and block_length must be positive")
    path = []
    start = 1
    regime = 1
    while start <= T:
        path.append((start, regime))
        start += block_length
        regime = regime % n_regimes + 1
    return tuple(path)


@dataclass
class GeneratorSpec:
    """Everything needed to reproduce one synthetic benchmark data set.

    ``sigma_x`` is the innovation variance per component (covariance
    sigma_x * I); ``sigma_u`` the covariate noise standard deviation.  The
    noise on the random-walk covariate defaults to the shared sigma_u and
    can be overridden with ``u4_noise_std``.  ``regime_path`` lists
    (start_time, regime_index) pairs, 1-based, covering 1..T.
    """

    T: int = 1002
    sigma_x: float = 0.005
    sigma_u: float = 0.5
    walk_low: float = -0.5
    walk_high: float = 0.5
    walk_start: float = 0.5
    u4_noise_std: float = None
    regime_path: tuple = None
    block_length: int = 250
    seed: int = 0
    theta: ModelSet = None
    x_init: np.ndarray = None

    def __post_init__(self):
        if self.T < 2:
            raise ValueError("T must be at least 2")
        if self.sigma_x < 0 or self.sigma_u < 0:
            raise ValueError("noise scales must be nonnegative")
        if self.theta is None or self.x_init is None:
            theta, x_init = load_two_regime_models()
            if self.theta is None:
                self.theta = theta
            if self.x_init is None:
                self.x_init = x_init
        self.x_init = np.asarray(self.x_init, dtype=float)
        if self.x_init.shape != (self.theta.dimx, self.theta.mem):
            raise ValueError("x_init must provide the first mem columns")
        if self.u4_noise_std is None:
            self.u4_noise_std = self.sigma_u
        if self.regime_path is None:
            self.regime_path = default_regime_path(self.T, self.block_length, self.theta.K)
        self.regime_path = tuple((int(s), int(r)) for s, r in self.regime_path)
        starts = [s for s, _ in self.regime_path]
        if starts[0] != 1 or any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("regime_path must start at t=1 with increasing start times")
        if starts[-1] > self.T:
            raise ValueError("regime_path extends beyond T")
        if any(not 1 <= r <= self.theta.K for _, r in self.regime_path):
            raise ValueError(f"regime indices must lie in 1..{self.theta.K}")

    def regime_indicator(self):
        """Per-step regime indices (1-based), length T."""
        out = np.empty(self.T, dtype=int)
        starts = [s for s, _ in self.regime_path] + [self.T + 1]
        for (start, regime), nxt in zip(self.regime_path, starts[1:]):
            out[start - 1:nxt - 1] = regime
        return out

    def true_weights(self):
        """Hard switching weights (one-hot columns) from the regime path."""
        regime = self.regime_indicator()
        w = np.zeros((self.theta.K, self.T))
        w[regime - 1, np.arange(self.T)] = 1.0
        return SwitchingWeights(w)


def make_covariates(spec):
    """Generate the four covariates; deterministic given ``spec.seed``."""
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(0,)))
    T = spec.T
    t = np.arange(1, T + 1, dtype=float)
    u = np.empty((4, T))
    u[0] = -2.0 * t / T + 1.0 + rng.normal(0.0, spec.sigma_u, T)
    u[1] = np.sin(2.0 * np.pi * t / 150.0) + rng.normal(0.0, spec.sigma_u, T)
    u[2] = (np.sin(2.0 * np.pi * t / 200.0)
            * np.cos(2.0 * np.pi * t / 40.0 + 0.5 * np.pi * np.sin(2.0 * np.pi * t / 120.0))
            + rng.normal(0.0, spec.sigma_u, T))
    walk = np.empty(T)
    walk[0] = spec.walk_start
    for i in range(1, T):
        walk[i] = walk[i - 1] + spec.walk_low + (spec.walk_high - spec.walk_low) * rng.random()
    u[3] = walk + rng.normal(0.0, spec.u4_noise_std, T)
    return u


def make_series(spec, covariates):
    """Simulate the target series along the hard regime path.

    Returns ``(values, weights)`` where ``values`` is the (dimx x T) series
    and ``weights`` the generating switching process.
    """
    covariates = np.asarray(covariates, dtype=float)
    if covariates.shape != (spec.theta.dimu, spec.T):
        raise ValueError("covariates shape does not match the spec")
    weights = spec.true_weights()
    noise_cov = spec.sigma_x * np.eye(spec.theta.dimx) if spec.sigma_x > 0 else None
    values = simulate(spec.theta, weights, covariates, spec.x_init,
                      noise_cov=noise_cov,
                      seed=np.random.SeedSequence(spec.seed, spawn_key=(1,)))
    return values, weights


def make_dataset(spec):
    """Covariates, series and true weights in one call."""
    u = make_covariates(spec)
    x, weights = make_series(spec, u)
    return x, u, weights


def inject_mcar(series, fraction, protected_times=None, seed=0):
    """Mark a completely-at-random subset of entries as missing.

    Exactly ``round(fraction * n_eligible)`` scalar entries are drawn
    uniformly without replacement from the entries whose (1-based) time
    index is not protected and that are not already missing.  Newly missing
    values are replaced by NaN.  ``protected_times`` defaults to the first
    and last step {1, T}.
    """
    if not 0.0 <= fraction < 1.0:
        raise ValueError("fraction must lie in [0, 1)")
    if protected_times is None:
        protected_times = {1, series.T}
    protected = np.zeros(series.T, dtype=bool)
    for t in protected_times:
        if not 1 <= t <= series.T:
            raise ValueError(f"protected time {t} outside 1..{series.T}")
        protected[t - 1] = True

    eligible = ~series.mask & ~protected[None, :]
    pool = np.flatnonzero(eligible.ravel())
    n_new = int(round(fraction * pool.size))
    if n_new > pool.size:
        raise ValueError("fraction exhausts the eligible entries")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(pool, size=n_new, replace=False) if n_new else np.empty(0, dtype=int)

    mask = series.mask.copy()
    mask.ravel()[chosen] = True
    values = series.values.copy()
    values.ravel()[chosen] = np.nan
    return TimeSeriesWithMask(values, mask)
