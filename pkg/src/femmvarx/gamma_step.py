"""Switching-weight estimation: a linear program over the weight field.

For fixed models and filled series the objective is linear in the weights,
with coefficients d_{k,t} = g(theta_k; X_t, U_t).  Each column is
constrained to the probability simplex and each row's total variation is
bounded by C.  The absolute values in the variation bound are linearized
with auxiliary slack variables s_{k,t} >= |gamma_{k,t+1} - gamma_{k,t}|,
which keeps the problem an ordinary sparse LP.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .core import FemmError, SwitchingWeights, regression_arrays

_FEAS_TOL = 1e-7


class GammaSolveError(FemmError):
    """The weight LP failed or returned an infeasible point."""


def distance_matrix(model_set, x, u):
    """Per-model squared residuals for every usable step.

    Returns a (K, T - mem) matrix whose entry (k, i) is
    g(theta_k; X_t, U_t) at t = t_st + i.  Both buffers must be complete.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if not (np.isfinite(x).all() and np.isfinite(u).all()):
        raise ValueError("buffers must be complete; fill missing entries first")
    design, targets = regression_arrays(x, u, model_set.n_lags_x, model_set.n_lags_u)
    out = np.empty((model_set.K, targets.shape[0]))
    for k, model in enumerate(model_set):
        resid = targets - design @ model.coefficient_matrix()
        out[k] = (resid * resid).sum(axis=1)
    return out


def _bv_lp_matrices(K, n_cols):
    """Sparse constraint matrices of the linearized variation bound."""
    ng = K * n_cols
    ns = K * (n_cols - 1)
    n_var = ng + ns
    # simplex: each column of the weight field sums to one
    A_eq = sp.csr_matrix(
        (np.ones(ng), (np.tile(np.arange(n_cols), K), np.arange(ng))),
        shape=(n_cols, n_var))
    if ns == 0:
        return A_eq, sp.csr_matrix((0, n_var)), np.zeros(0)
    # per (k, t): +-(gamma_{k,t+1} - gamma_{k,t}) - s_{k,t} <= 0, then one
    # budget row per k: sum_t s_{k,t} <= C
    rows, cols, vals = [], [], []
    r = 0
    for k in range(K):
        g0 = k * n_cols
        s0 = ng + k * (n_cols - 1)
        t = np.arange(n_cols - 1)
        pair_rows = r + 2 * t
        rows.append(np.repeat(pair_rows, 3))
        cols.append(np.stack([g0 + t + 1, g0 + t, s0 + t], axis=1).ravel())
        vals.append(np.tile([1.0, -1.0, -1.0], n_cols - 1))
        rows.append(np.repeat(pair_rows + 1, 3))
        cols.append(np.stack([g0 + t + 1, g0 + t, s0 + t], axis=1).ravel())
        vals.append(np.tile([-1.0, 1.0, -1.0], n_cols - 1))
        r += 2 * (n_cols - 1)
        rows.append(np.full(n_cols - 1, r))
        cols.append(np.arange(s0, s0 + n_cols - 1))
        vals.append(np.ones(n_cols - 1))
        r += 1
    A_ub = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(r, n_var))
    budget_rows = np.flatnonzero(np.arange(r) % (2 * (n_cols - 1) + 1) == 2 * (n_cols - 1))
    return A_eq, A_ub, budget_rows


def solve_gamma(distances, c_bound, t_st=1):
    """Minimize the weighted distance sum over the constrained weight field.

    Parameters
    ----------
    distances : ndarray (K, T')
        Distance coefficients for the columns t = t_st..T.
    c_bound : float
        Total-variation budget C per weight row.
    t_st : int
        First usable step (1-based).  Columns before t_st carry no
        objective coefficient; they are returned as copies of the column
        at t_st so the weights cover all of 1..T.

    Returns
    -------
    SwitchingWeights with K rows and T' + t_st - 1 columns.
    """
    d = np.asarray(distances, dtype=float)
    if d.ndim != 2:
        raise ValueError("distances must be a (K x T') matrix")
    if not np.isfinite(d).all():
        raise ValueError("distances must be finite")
    if c_bound < 0:
        raise ValueError("the variation bound must be nonnegative")
    if t_st < 1:
        raise ValueError("t_st must be >= 1")
    K, n_cols = d.shape

    if K == 1:
        return SwitchingWeights(np.ones((1, n_cols + t_st - 1)))

    ng = K * n_cols
    ns = K * (n_cols - 1)
    A_eq, A_ub, budget_rows = _bv_lp_matrices(K, n_cols)
    b_eq = np.ones(n_cols)
    b_ub = np.zeros(A_ub.shape[0])
    if ns:
        b_ub[budget_rows] = c_bound
    cost = np.concatenate([d.ravel(), np.zeros(ns)])
    bounds = [(0.0, 1.0)] * ng + [(0.0, 2.0)] * ns

    res = linprog(cost, A_ub=A_ub if ns else None, b_ub=b_ub if ns else None,
                  A_eq=A_eq, b_eq=b_eq, bounds=bounds, method='highs-ds')
    if not res.success:
        raise GammaSolveError(
            f"weight LP failed: status {res.status} ({res.message}); "
            f"iterations {getattr(res, 'nit', 'n/a')}")

    g = res.x[:ng].reshape(K, n_cols)
    # tidy the vertex solution: clip solver-tolerance negatives, renormalize
    if g.min() < -_FEAS_TOL:
        raise GammaSolveError(
            f"weight LP violated nonnegativity by {-g.min():.2e}")
    g = np.clip(g, 0.0, None)
    colsums = g.sum(axis=0)
    if np.abs(colsums - 1.0).max() > _FEAS_TOL:
        raise GammaSolveError(
            f"weight LP violated the simplex constraint by "
            f"{np.abs(colsums - 1.0).max():.2e}")
    g /= colsums
    bv = np.abs(np.diff(g, axis=1)).sum(axis=1) if n_cols > 1 else np.zeros(K)
    if bv.max() > c_bound + _FEAS_TOL:
        raise GammaSolveError(
            f"weight LP violated the variation bound: {bv.max():.8f} > {c_bound}")

    if t_st > 1:
        g = np.concatenate([np.repeat(g[:, :1], t_st - 1, axis=1), g], axis=1)
    return SwitchingWeights(g)
