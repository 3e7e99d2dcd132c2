"""Domain types and model evaluation for regime-switching VARX series.

A series X_t (dimx x T) is approximated by K local VARX models blended by
time-dependent weights gamma_{k,t}.  Each local model has an offset c_k,
interaction matrices A_{k,1..Q} acting on lagged X, and control matrices
B_{k,0..P} acting on the covariate series U_t.  The fit quality at step t
under model k is the squared residual

    g(theta_k; X_t, U_t) = || X_t - c_k - sum_q A_{k,q} X_{t-q}
                                       - sum_p B_{k,p} U_{t-p} ||_2^2

and the overall objective sums gamma_{k,t} * g(theta_k; X_t, U_t) over
k = 1..K and t = t_st..T, with t_st = max(Q, P) + 1.

Time steps are counted 1-based (t = 1..T) in every public signature to
match the column positions of the stored arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class FemmError(Exception):
    """Base class for solver failures raised by this package."""


class FemmNumericsWarning(UserWarning):
    """Emitted when a numerical fallback or regularization path is taken."""


def _as_weight_array(gamma):
    """Accept a SwitchingWeights or a bare (K, T) array."""
    if isinstance(gamma, SwitchingWeights):
        return gamma.weights
    return np.asarray(gamma, dtype=float)


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass
class TimeSeriesWithMask:
    """A real-valued series (dim x T) with a boolean missingness mask.

    ``mask[d, t]`` is True where the entry is missing.  Observed positions
    must hold finite values; missing positions may hold NaN.
    """

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.values = np.array(self.values, dtype=float)
        self.mask = np.array(self.mask, dtype=bool)
        if self.values.ndim != 2:
            raise ValueError("values must be a (dim x T) matrix")
        if self.mask.shape != self.values.shape:
            raise ValueError("mask and values must have identical shape")
        if self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise ValueError("series must have at least one dimension and one time step")
        if not np.isfinite(self.values[~self.mask]).all():
            raise ValueError("observed entries (mask False) must be finite")

    @classmethod
    def from_array(cls, values):
        """Build a series whose mask marks the NaN entries of ``values``."""
        values = np.asarray(values, dtype=float)
        return cls(values, np.isnan(values))

    @classmethod
    def complete(cls, values):
        """Build a series with no missing entries."""
        values = np.asarray(values, dtype=float)
        return cls(values, np.zeros(values.shape, dtype=bool))

    @property
    def dim(self):
        return self.values.shape[0]

    @property
    def T(self):
        return self.values.shape[1]

    @property
    def n_missing(self):
        return int(self.mask.sum())

    def filled_with(self, fill_values):
        """Return a copy of ``values`` with missing entries taken from ``fill_values``."""
        fill_values = np.asarray(fill_values, dtype=float)
        if fill_values.shape != self.values.shape:
            raise ValueError("fill_values shape mismatch")
        out = self.values.copy()
        out[self.mask] = fill_values[self.mask]
        return out


@dataclass
class LocalModel:
    """Parameters of one local stationary VARX model.

    ``interactions`` stacks the Q lag matrices in lag order (A_1..A_Q, each
    dimx x dimx); ``controls`` stacks the P+1 covariate matrices in lag
    order (B_0..B_P, each dimx x dimu).
    """

    offset: np.ndarray
    interactions: np.ndarray
    controls: np.ndarray

    def __post_init__(self):
        self.offset = np.asarray(self.offset, dtype=float).reshape(-1)
        dimx = self.offset.shape[0]
        self.interactions = np.asarray(self.interactions, dtype=float)
        if self.interactions.size == 0:
            self.interactions = self.interactions.reshape(0, dimx, dimx)
        self.controls = np.asarray(self.controls, dtype=float)
        if self.interactions.ndim != 3 or self.interactions.shape[1:] != (dimx, dimx):
            raise ValueError("interactions must stack (dimx x dimx) matrices")
        if self.controls.ndim != 3 or self.controls.shape[0] < 1 or self.controls.shape[1] != dimx:
            raise ValueError("controls must stack at least one (dimx x dimu) matrix")

    @property
    def dimx(self):
        return self.offset.shape[0]

    @property
    def dimu(self):
        return self.controls.shape[2]

    @property
    def n_lags_x(self):
        """Number of autoregressive lags Q."""
        return self.interactions.shape[0]

    @property
    def n_lags_u(self):
        """Covariate lag depth P (controls cover lags 0..P)."""
        return self.controls.shape[0] - 1

    def coefficient_matrix(self):
        """Stack the parameters as the regression coefficient matrix.

        Row layout matches the design rows [1, X_{t-1}.., X_{t-Q}.., U_t..,
        U_{t-P}..]: the matrix is (1 + dimx*Q + dimu*(P+1)) x dimx with
        blocks [offset; A_1^T; ..; A_Q^T; B_0^T; ..; B_P^T].
        """
        blocks = [self.offset[None, :]]
        blocks += [a.T for a in self.interactions]
        blocks += [b.T for b in self.controls]
        return np.concatenate(blocks, axis=0)

    @classmethod
    def from_coefficient_matrix(cls, coef, dimu, n_lags_x, n_lags_u):
        """Inverse of :meth:`coefficient_matrix`."""
        coef = np.asarray(coef, dtype=float)
        dimx = coef.shape[1]
        expected = 1 + dimx * n_lags_x + dimu * (n_lags_u + 1)
        if coef.shape[0] != expected:
            raise ValueError(f"coefficient matrix has {coef.shape[0]} rows, expected {expected}")
        offset = coef[0]
        pos = 1
        inter = np.empty((n_lags_x, dimx, dimx))
        for q in range(n_lags_x):
            inter[q] = coef[pos:pos + dimx].T
            pos += dimx
        ctrl = np.empty((n_lags_u + 1, dimx, dimu))
        for p in range(n_lags_u + 1):
            ctrl[p] = coef[pos:pos + dimu].T
            pos += dimu
        return cls(offset, inter, ctrl)

    def flatten(self):
        """All parameter entries as one vector (offset, A_1..A_Q, B_0..B_P)."""
        return np.concatenate([self.offset.ravel(),
                               self.interactions.ravel(),
                               self.controls.ravel()])

    def l1_norm(self):
        return float(np.abs(self.flatten()).sum())


@dataclass
class ModelSet:
    """An ordered collection of K local models sharing identical shapes."""

    models: list

    def __post_init__(self):
        if len(self.models) < 1:
            raise ValueError("model set must contain at least one model")
        first = self.models[0]
        for m in self.models[1:]:
            if (m.dimx, m.dimu, m.n_lags_x, m.n_lags_u) != (
                    first.dimx, first.dimu, first.n_lags_x, first.n_lags_u):
                raise ValueError("all local models must share (dimx, dimu, Q, P)")

    def __len__(self):
        return len(self.models)

    def __iter__(self):
        return iter(self.models)

    def __getitem__(self, k):
        return self.models[k]

    @property
    def K(self):
        return len(self.models)

    @property
    def dimx(self):
        return self.models[0].dimx

    @property
    def dimu(self):
        return self.models[0].dimu

    @property
    def n_lags_x(self):
        return self.models[0].n_lags_x

    @property
    def n_lags_u(self):
        return self.models[0].n_lags_u

    @property
    def mem(self):
        """Memory depth max(Q, P) of the regression window."""
        return max(self.n_lags_x, self.n_lags_u)

    @property
    def t_st(self):
        """First time step (1-based) with a complete regression window."""
        return self.mem + 1


@dataclass
class SwitchingWeights:
    """The K x T weight field of the switching process.

    Every column lies on the probability simplex; the per-row total
    variation from t_st onward is bounded by the persistency constant C
    whenever the weights come out of the weight solver.
    """

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.ndim != 2:
            raise ValueError("weights must be a (K x T) matrix")
        if self.weights.min() < -1e-12:
            raise ValueError("weights must be nonnegative")
        colsums = self.weights.sum(axis=0)
        if np.abs(colsums - 1.0).max() > 1e-9:
            raise ValueError("every weight column must sum to 1 within 1e-9")

    @property
    def K(self):
        return self.weights.shape[0]

    @property
    def T(self):
        return self.weights.shape[1]

    def bv_norms(self, t_st=1):
        """Per-row total variation sum_{t=t_st}^{T-1} |g_{k,t+1} - g_{k,t}| (t 1-based)."""
        if not 1 <= t_st <= self.T:
            raise ValueError("t_st out of range")
        diffs = np.diff(self.weights[:, t_st - 1:], axis=1)
        return np.abs(diffs).sum(axis=1)

    def hard_assignment(self):
        """Per-column argmax labels (0-based model indices)."""
        return self.weights.argmax(axis=0)


@dataclass
class FemmConfig:
    """All solver hyperparameters of the alternating fit.

    ``C`` bounds the total variation of each weight trajectory,
    ``lasso_bound`` the L1 norm of each local model, ``ridge_x``/``ridge_u``
    are the shrinkage multipliers on the reconstructed missing values.
    """

    K: int
    C: float
    Q: int
    P: int
    lasso_bound: float = math.inf
    ridge_x: float = 0.0
    ridge_u: float = 0.005
    max_restart: int = 10
    max_alternate: int = 100
    tol: float = 5e-4
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be a positive integer")
        if self.C < 0:
            raise ValueError("C must be nonnegative")
        if self.Q < 0 or self.P < 0:
            raise ValueError("lag orders must be nonnegative")
        if not self.lasso_bound > 0:
            raise ValueError("lasso_bound must be positive (may be inf)")
        if self.ridge_x < 0 or self.ridge_u < 0:
            raise ValueError("ridge multipliers must be nonnegative")
        if self.max_restart < 1 or self.max_alternate < 1:
            raise ValueError("max_restart and max_alternate must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")

    @property
    def mem(self):
        return max(self.Q, self.P)

    @property
    def t_st(self):
        return self.mem + 1


# ---------------------------------------------------------------------------
# embeddings and regression arrays
# ---------------------------------------------------------------------------

def embed_x(values, t, n_lags):
    """Stack the window (X_{t-Q}, ..., X_{t-1}, X_t) into one vector.

    Parameters
    ----------
    values : ndarray, shape (dimx, T)
    t : int
        Time step, 1-based; requires t >= n_lags + 1.
    n_lags : int
        Number of lags Q; the result has length dimx * (Q + 1).
    """
    values = np.asarray(values, dtype=float)
    if t <= n_lags:
        raise IndexError(f"t={t} leaves no complete window for Q={n_lags}")
    if t > values.shape[1]:
        raise IndexError(f"t={t} exceeds series length {values.shape[1]}")
    return values[:, t - 1 - n_lags:t].T.ravel()


def embed_u_newest_first(values, t, n_lags):
    """Stack (U_t, U_{t-1}, ..., U_{t-P}); the covariate window of the X-side QP."""
    values = np.asarray(values, dtype=float)
    if t <= n_lags:
        raise IndexError(f"t={t} leaves no complete window for P={n_lags}")
    if t > values.shape[1]:
        raise IndexError(f"t={t} exceeds series length {values.shape[1]}")
    return values[:, t - 1 - n_lags:t].T[::-1].ravel()


def embed_u_oldest_first(values, t, n_lags):
    """Stack (U_{t-P}, ..., U_t); the covariate window of the U-side QP."""
    values = np.asarray(values, dtype=float)
    if t <= n_lags:
        raise IndexError(f"t={t} leaves no complete window for P={n_lags}")
    if t > values.shape[1]:
        raise IndexError(f"t={t} exceeds series length {values.shape[1]}")
    return values[:, t - 1 - n_lags:t].T.ravel()


def regression_arrays(x, u, n_lags_x, n_lags_u):
    """Design matrix and targets of the per-step regression.

    Row i (for time step t = t_st + i, 1-based) holds
    [1, X_{t-1}^T, ..., X_{t-Q}^T, U_t^T, ..., U_{t-P}^T]; the target row
    is X_t^T.  Returns ``(design, targets)`` with shapes
    (T - mem) x (1 + dimx*Q + dimu*(P+1)) and (T - mem) x dimx.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.ndim != 2 or u.ndim != 2 or x.shape[1] != u.shape[1]:
        raise ValueError("x and u must be 2-d with the same number of time steps")
    T = x.shape[1]
    mem = max(n_lags_x, n_lags_u)
    if T <= mem:
        raise ValueError("series shorter than the regression memory")
    n_rows = T - mem
    blocks = [np.ones((n_rows, 1))]
    blocks += [x[:, mem - q:T - q].T for q in range(1, n_lags_x + 1)]
    blocks += [u[:, mem - p:T - p].T for p in range(n_lags_u + 1)]
    design = np.concatenate(blocks, axis=1)
    targets = x[:, mem:].T
    return design, targets


# ---------------------------------------------------------------------------
# model distance and objective
# ---------------------------------------------------------------------------

def model_distance(model, x, u, t):
    """Squared residual g(theta; X_t, U_t) of one local model at one step.

    ``t`` is 1-based and must leave a complete lag window on both series;
    the referenced window must not contain undefined values.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape[0] != model.dimx or u.shape[0] != model.dimu:
        raise ValueError("series dimensions do not match the model")
    t_st = max(model.n_lags_x, model.n_lags_u) + 1
    if t < t_st:
        raise IndexError(f"t={t} is below the first usable step t_st={t_st}")
    if t > x.shape[1] or t > u.shape[1]:
        raise IndexError(f"t={t} exceeds the series length")
    i = t - 1
    r = x[:, i] - model.offset
    for q in range(1, model.n_lags_x + 1):
        r = r - model.interactions[q - 1] @ x[:, i - q]
    for p in range(model.n_lags_u + 1):
        r = r - model.controls[p] @ u[:, i - p]
    if not np.isfinite(r).all():
        raise ValueError("referenced window contains undefined values")
    return float(r @ r)


def objective(model_set, gamma, x, u):
    """Weighted model distance summed over models and usable time steps.

    Both series must be complete (missing entries already replaced by the
    current reconstruction).  ``gamma`` may be a SwitchingWeights or a bare
    (K, T) array; columns before t_st carry no weight in the sum.
    """
    weights = _as_weight_array(gamma)
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if weights.shape[0] != model_set.K:
        raise ValueError("gamma has the wrong number of rows")
    if weights.shape[1] != x.shape[1] or x.shape[1] != u.shape[1]:
        raise ValueError("gamma, x and u must cover the same time steps")
    if not (np.isfinite(x).all() and np.isfinite(u).all()):
        raise ValueError("series must be complete; fill missing entries first")
    design, targets = regression_arrays(x, u, model_set.n_lags_x, model_set.n_lags_u)
    total = 0.0
    for k, model in enumerate(model_set):
        resid = targets - design @ model.coefficient_matrix()
        total += float(weights[k, model_set.mem:] @ (resid * resid).sum(axis=1))
    return total


def simulate(model_set, gamma, u, x_init, noise_cov=None, seed=None):
    """Iterate the weighted mixture VARX recursion forward.

    Parameters
    ----------
    model_set : ModelSet
    gamma : SwitchingWeights or ndarray (K, T)
        Mixing weights for every step; only columns t >= t_st are used.
    u : ndarray (dimu, T)
        Complete covariate series.
    x_init : ndarray (dimx, mem)
        The first mem columns X_1..X_mem.
    noise_cov : ndarray (dimx, dimx) or None
        Covariance of the per-model innovation terms; None or all-zero
        yields the exact mixture-model mean path.
    seed : int, SeedSequence or Generator, optional
        Innovation stream; the output is deterministic given the seed.

    Returns
    -------
    ndarray (dimx, T)
    """
    weights = _as_weight_array(gamma)
    u = np.asarray(u, dtype=float)
    if not np.isfinite(u).all():
        raise ValueError("covariate series must be complete")
    K, T = weights.shape
    if K != model_set.K:
        raise ValueError("gamma has the wrong number of rows")
    if u.shape[1] != T:
        raise ValueError("u and gamma must cover the same time steps")
    mem = model_set.mem
    x_init = np.asarray(x_init, dtype=float)
    if x_init.shape != (model_set.dimx, mem) and not (mem == 0 and x_init.size == 0):
        raise ValueError(f"x_init must provide the first {mem} columns")

    chol = None
    if noise_cov is not None:
        noise_cov = np.asarray(noise_cov, dtype=float)
        if noise_cov.ndim == 0:
            if noise_cov != 0.0:
                raise ValueError("scalar noise_cov must be 0; pass a covariance matrix otherwise")
        elif noise_cov.shape != (model_set.dimx, model_set.dimx):
            raise ValueError("noise_cov must be a (dimx x dimx) matrix or zero")
        elif np.any(noise_cov != 0.0):
            chol = np.linalg.cholesky(noise_cov)
    rng = np.random.default_rng(seed)

    x = np.zeros((model_set.dimx, T))
    if mem:
        x[:, :mem] = x_init
    for i in range(mem, T):
        acc = np.zeros(model_set.dimx)
        for k, model in enumerate(model_set):
            step = model.offset.copy()
            for q in range(1, model.n_lags_x + 1):
                step += model.interactions[q - 1] @ x[:, i - q]
            for p in range(model.n_lags_u + 1):
                step += model.controls[p] @ u[:, i - p]
            if chol is not None:
                step += chol @ rng.standard_normal(model_set.dimx)
            acc += weights[k, i] * step
        x[:, i] = acc
    return x
