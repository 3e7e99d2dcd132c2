"""Quadratic program in the stacked covariate series, mirroring the series side.

With the models and weights fixed, the objective is quadratic in the
flattened covariates U = (U_1^T, ..., U_T^T)^T.  The per-step blocks

    D_t = sum_k gamma_{k,t} Bhat_k^T Bhat_k,
    G_t = -2 sum_k gamma_{k,t} Bhat_k^T (X_t - c_k - sum_q A_{k,q} X_{t-q}),

with Bhat_k = [B_{k,P}, ..., B_{k,0}] acting on the ascending window
(U_{t-P}, ..., U_t), are accumulated with a shift of dimu per step.  The
reduction to missing coordinates and the ridge solve reuse the series-side
machinery unchanged.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .core import _as_weight_array, regression_arrays
from .qp_x import AssembledQP, ReductionMaps, reduce_qp, solve_missing  # noqa: F401

__all__ = [
    'assemble_block_u', 'assemble_qp_u', 'reduce_qp', 'solve_missing',
    'AssembledQP', 'ReductionMaps',
]


def _stack_controls_oldest_first(model):
    """[B_P, ..., B_0], matching the ascending window (U_{t-P}, ..., U_t)."""
    return np.concatenate(list(model.controls[::-1]), axis=1)


def _ar_residual(model, x_window):
    """X_t - c - sum_q A_q X_{t-q} for a window stacked newest first."""
    dimx = model.dimx
    r = x_window[:dimx] - model.offset
    for q in range(1, model.n_lags_x + 1):
        r = r - model.interactions[q - 1] @ x_window[q * dimx:(q + 1) * dimx]
    return r


def assemble_block_u(model_set, gamma_col, x_window):
    """Per-step window block (D_t, G_t) of the covariate-side quadratic.

    Parameters
    ----------
    model_set : ModelSet
    gamma_col : ndarray (K,)
        The weight column at step t.
    x_window : ndarray (dimx*(Q+1),)
        The series window stacked newest first, (X_t, X_{t-1}, ..., X_{t-Q}).
    """
    gamma_col = np.asarray(gamma_col, dtype=float).reshape(-1)
    x_window = np.asarray(x_window, dtype=float).reshape(-1)
    if gamma_col.shape[0] != model_set.K:
        raise ValueError("gamma column length must equal K")
    if x_window.shape[0] != model_set.dimx * (model_set.n_lags_x + 1):
        raise ValueError("x window length must be dimx*(Q+1)")
    w = model_set.dimu * (model_set.n_lags_u + 1)
    Dt = np.zeros((w, w))
    Gt = np.zeros(w)
    for k, model in enumerate(model_set):
        ctrl = _stack_controls_oldest_first(model)
        gram = ctrl.T @ ctrl
        Dt += gamma_col[k] * 0.5 * (gram + gram.T)
        Gt += gamma_col[k] * (-2.0) * (ctrl.T @ _ar_residual(model, x_window))
    return Dt, Gt


def assemble_qp_u(model_set, gamma, x, u):
    """Accumulate the window blocks into the full quadratic over dimu*T coordinates.

    The block at step t covers the coordinates of U_{t-P}..U_t, i.e. it is
    placed at flat offset (t-P-1)*dimu.  ``u`` is accepted for shape
    validation only; the quadratic depends on gamma and x.
    """
    weights = _as_weight_array(gamma)
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    K, T = weights.shape
    dimx, dimu = model_set.dimx, model_set.dimu
    Q, P, mem = model_set.n_lags_x, model_set.n_lags_u, model_set.mem
    if K != model_set.K:
        raise ValueError("gamma has the wrong number of rows")
    if x.shape != (dimx, T) or u.shape != (dimu, T):
        raise ValueError("series shapes do not match gamma and the model set")
    if not np.isfinite(x).all():
        raise ValueError("series buffer must be complete")
    if T <= mem:
        raise ValueError("series shorter than the regression memory")

    w = dimu * (P + 1)
    n_steps = T - mem
    g_eff = weights[:, mem:]

    grams = np.empty((K, w, w))
    controls = []
    for k, model in enumerate(model_set):
        ctrl = _stack_controls_oldest_first(model)
        controls.append(ctrl)
        gram = ctrl.T @ ctrl
        grams[k] = 0.5 * (gram + gram.T)
    Dt = np.einsum('kt,kij->tij', g_eff, grams)

    # autoregressive residuals for all steps from the shared design rows
    design, targets = regression_arrays(x, u, Q, P)
    n_ar = 1 + dimx * Q
    Gt = np.zeros((n_steps, w))
    for k, model in enumerate(model_set):
        coef = model.coefficient_matrix()[:n_ar]
        resid = targets - design[:, :n_ar] @ coef
        Gt += g_eff[k][:, None] * (resid @ controls[k])
    Gt *= -2.0

    offsets = (np.arange(mem, T) - P) * dimu
    rows = (offsets[:, None] + np.repeat(np.arange(w), w)[None, :]).ravel()
    cols = (offsets[:, None] + np.tile(np.arange(w), w)[None, :]).ravel()
    n = dimu * T
    H = sp.coo_matrix((Dt.reshape(n_steps, -1).ravel(), (rows, cols)), shape=(n, n)).tocsr()
    f = np.zeros(n)
    np.add.at(f, (offsets[:, None] + np.arange(w)[None, :]).ravel(), Gt.ravel())
    return AssembledQP(H, f)
