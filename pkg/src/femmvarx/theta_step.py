"""Per-regime weighted least squares with an optional L1-ball constraint.

Each local model is fit separately: with weights w_t = gamma_{k,t} the
objective is sum_t w_t || X_t - row_t theta ||^2 over the shared design
rows [1, X_{t-1}.., X_{t-Q}.., U_t.., U_{t-P}..].  Without a bound this is
a weighted normal-equations solve (with an L2 fallback when the Gram
matrix is ill conditioned).  With a finite bound the constraint couples
all entries of the local model, including the offset; the constrained
convex QP is solved by an accelerated projected-gradient iteration with a
monotonicity safeguard.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .core import FemmError, FemmNumericsWarning, LocalModel, regression_arrays

_COND_LIMIT = 1e12


class EmptyClusterError(FemmError):
    """All regression weights of a cluster vanish; nothing to fit."""


def build_design(x, u, n_lags_x, n_lags_u):
    """Design matrix and target matrix of the per-step regression.

    Row i (time step t = t_st + i) is [1, X_{t-1}^T, ..., X_{t-Q}^T,
    U_t^T, ..., U_{t-P}^T]; the matching target row is X_t^T.
    """
    return regression_arrays(x, u, n_lags_x, n_lags_u)


def project_l1_ball(v, radius):
    """Euclidean projection of a vector onto the L1 ball of given radius."""
    v = np.asarray(v, dtype=float)
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    if radius == 0:
        return np.zeros_like(v)
    mag = np.abs(v)
    if mag.sum() <= radius:
        return v.copy()
    u = np.sort(mag)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, u.size + 1)
    rho = np.nonzero(u * idx > css - radius)[0][-1]
    shift = (css[rho] - radius) / (rho + 1.0)
    return np.sign(v) * np.maximum(mag - shift, 0.0)


def _weighted_gram(design, targets, weights, l2_fallback):
    """Weighted Gram matrix and cross term, with a conditioning floor."""
    wd = design * weights[:, None]
    gram = design.T @ wd
    gram = 0.5 * (gram + gram.T)
    cross = wd.T @ targets
    eigs = np.linalg.eigvalsh(gram)
    cond = eigs[-1] / eigs[0] if eigs[0] > 0 else math.inf
    if cond > _COND_LIMIT:
        if l2_fallback is None:
            l2_fallback = 1e-8 * np.trace(gram) / gram.shape[0]
        gram = gram + l2_fallback * np.eye(gram.shape[0])
        warnings.warn(
            f"weighted Gram matrix condition estimate {cond:.2e} exceeds "
            f"{_COND_LIMIT:.0e}; adding an L2 floor of {l2_fallback:.2e}",
            FemmNumericsWarning, stacklevel=3)
        eigs = np.linalg.eigvalsh(gram)
    return gram, cross, eigs


def _l1_constrained_coef(gram, cross, radius, start, max_iter=20000, tol=1e-12):
    """Minimize tr(M^T G M) - 2 tr(C^T M) subject to ||vec(M)||_1 <= radius.

    Accelerated projected gradient with a best-iterate safeguard; ``start``
    must be feasible and is never worsened.
    """
    shape = start.shape

    def value(mat):
        return float(np.einsum('ij,ij->', mat, gram @ mat) - 2.0 * np.einsum('ij,ij->', cross, mat))

    lips = 2.0 * float(np.linalg.eigvalsh(gram)[-1])
    if lips <= 0:
        return start
    step = 1.0 / lips
    x = start.copy()
    best_val, best = value(x), x.copy()
    y = x.copy()
    t_acc = 1.0
    for _ in range(max_iter):
        grad = 2.0 * (gram @ y - cross)
        x_new = project_l1_ball((y - step * grad).ravel(), radius).reshape(shape)
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_acc * t_acc))
        y = x_new + ((t_acc - 1.0) / t_new) * (x_new - x)
        t_acc = t_new
        val = value(x_new)
        if val < best_val:
            best_val, best = val, x_new.copy()
        delta = np.abs(x_new - x).max()
        x = x_new
        if delta <= tol * (1.0 + np.abs(x).max()):
            break
    return best


def solve_theta(design, targets, weights, n_lags_x, n_lags_u,
                lasso_bound=math.inf, l2_fallback=None, warm_start=None):
    """Fit one local model by weighted least squares.

    Parameters
    ----------
    design, targets : ndarray
        Output of :func:`build_design`.
    weights : ndarray (n_rows,)
        Nonnegative regression weights (one weight row of the switching
        process); must not be all zero.
    n_lags_x, n_lags_u : int
        Lag orders Q and P used to rebuild the model from the coefficients.
    lasso_bound : float
        L1 bound on all model entries jointly; ``inf`` disables the
        constraint and returns the weighted normal-equations solution.
    l2_fallback : float, optional
        Diagonal floor used when the weighted Gram matrix is ill
        conditioned; defaults to 1e-8 * trace / ncols.
    warm_start : ndarray, optional
        Previous coefficient matrix; the constrained path never returns a
        point worse than a feasible warm start.
    """
    design = np.asarray(design, dtype=float)
    targets = np.asarray(targets, dtype=float)
    weights = np.asarray(weights, dtype=float).reshape(-1)
    if weights.shape[0] != design.shape[0]:
        raise ValueError("weights length must match the number of design rows")
    if weights.min() < 0:
        raise ValueError("weights must be nonnegative")
    if not weights.max() > 0:
        raise EmptyClusterError("empty cluster: all regression weights are zero")
    dimx = targets.shape[1]
    n_cols = design.shape[1]
    dimu, rem = divmod(n_cols - 1 - dimx * n_lags_x, n_lags_u + 1)
    if rem != 0 or dimu < 1:
        raise ValueError("design width does not match the stated lag orders")

    gram, cross, eigs = _weighted_gram(design, targets, weights, l2_fallback)
    if eigs[0] > 0:
        coef = np.linalg.solve(gram, cross)
    else:
        coef = np.linalg.lstsq(gram, cross, rcond=None)[0]
    if warm_start is not None and not math.isfinite(lasso_bound):
        # a floor-regularized solve is not an exact minimizer; never hand back
        # a point worse than the incumbent
        ws = np.asarray(warm_start, dtype=float)
        if ws.shape == coef.shape:
            def _value(mat):
                resid = targets - design @ mat
                return float(weights @ (resid * resid).sum(axis=1))
            if _value(ws) < _value(coef):
                coef = ws.copy()

    if math.isfinite(lasso_bound):
        if lasso_bound == 0:
            coef = np.zeros_like(coef)
        elif np.abs(coef).sum() > lasso_bound:
            start = project_l1_ball(coef.ravel(), lasso_bound).reshape(coef.shape)
            if warm_start is not None:
                ws = np.asarray(warm_start, dtype=float)
                if ws.shape == coef.shape and np.abs(ws).sum() <= lasso_bound + 1e-9:
                    w_val = np.einsum('ij,ij->', ws, gram @ ws) - 2 * np.einsum('ij,ij->', cross, ws)
                    s_val = np.einsum('ij,ij->', start, gram @ start) - 2 * np.einsum('ij,ij->', cross, start)
                    if w_val < s_val:
                        start = ws.copy()
            coef = _l1_constrained_coef(gram, cross, lasso_bound, start)
            # guarantee feasibility exactly, not just up to iteration error
            coef = project_l1_ball(coef.ravel(), lasso_bound).reshape(coef.shape)
    return LocalModel.from_coefficient_matrix(coef, dimu, n_lags_x, n_lags_u)
