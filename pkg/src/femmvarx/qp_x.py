"""Quadratic program in the stacked target series for missing-value recovery.

For fixed models and weights the overall objective is a quadratic form in
the flattened series X = (X_1^T, ..., X_T^T)^T: per-step windows

    Z_t = sum_k gamma_{k,t} Atil_k^T Atil_k,
    F_t = -2 sum_k gamma_{k,t} Atil_k^T (c_k + Btil_k Utr_t),

with Atil_k = [-A_{k,Q}, ..., -A_{k,1}, I] and Btil_k = [B_{k,0}, .., B_{k,P}]
acting on the window Utr_t = (U_t, .., U_{t-P}), are accumulated along the
diagonal with a shift of dimx per step.  The resulting matrix is banded
(bandwidth dimx*(Q+1)) and positive semidefinite as a weighted sum of Gram
matrices.  Restricting the quadratic to the missing coordinates and folding
the observed ones into the linear term yields the reconstruction QP.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cholesky_banded, cho_solve_banded, lstsq
from scipy.sparse.linalg import LinearOperator, onenormest

from .core import FemmError, FemmNumericsWarning, _as_weight_array

# reductions below this size are solved densely; larger ones use the band
_DENSE_FALLBACK_MAX = 8000


class QPSolveError(FemmError):
    """The reconstruction system could not be solved to a descent point."""


@dataclass
class AssembledQP:
    """A quadratic x^T H x + f^T x + constant over n coordinates.

    ``H`` is stored sparse (CSR), symmetric and positive semidefinite.  The
    constant collects terms independent of the free coordinates; it is left
    unevaluated (zero) because every consumer works with value differences.
    """

    H: sp.csr_matrix
    f: np.ndarray
    constant: float = 0.0

    def __post_init__(self):
        if not sp.issparse(self.H):
            self.H = sp.csr_matrix(np.atleast_2d(np.asarray(self.H, dtype=float)))
        else:
            self.H = self.H.tocsr()
        self.f = np.asarray(self.f, dtype=float).reshape(-1)
        if self.H.shape != (self.f.shape[0], self.f.shape[0]):
            raise ValueError("H and f dimensions do not agree")

    @property
    def n(self):
        return self.f.shape[0]

    def value(self, x):
        """Evaluate the quadratic (without the constant) at ``x``."""
        x = np.asarray(x, dtype=float)
        return float(x @ (self.H @ x) + self.f @ x)

    def dense(self):
        return self.H.toarray()


@dataclass
class ReductionMaps:
    """Flat coordinate indices of missing and observed entries.

    Flattening is time-major with the dimension index fastest, matching the
    stacking X = (X_1^T, ..., X_T^T)^T.
    """

    missing_indices: np.ndarray
    observed_indices: np.ndarray

    def __post_init__(self):
        self.missing_indices = np.asarray(self.missing_indices, dtype=int)
        self.observed_indices = np.asarray(self.observed_indices, dtype=int)

    @classmethod
    def from_mask(cls, mask):
        """Build maps from a (dim x T) boolean mask, True marking missing."""
        flat = np.asarray(mask, dtype=bool).T.ravel()
        return cls(np.flatnonzero(flat), np.flatnonzero(~flat))

    @property
    def n_total(self):
        return self.missing_indices.size + self.observed_indices.size


def _stack_ar(model):
    """[-A_Q, ..., -A_1, I], the window form of the autoregressive part."""
    dimx, Q = model.dimx, model.n_lags_x
    out = np.zeros((dimx, dimx * (Q + 1)))
    for q in range(1, Q + 1):
        out[:, (Q - q) * dimx:(Q - q + 1) * dimx] = -model.interactions[q - 1]
    out[:, Q * dimx:] = np.eye(dimx)
    return out


def _stack_controls_newest_first(model):
    """[B_0, B_1, ..., B_P], matching the window (U_t, ..., U_{t-P})."""
    return np.concatenate(list(model.controls), axis=1)


def assemble_block_x(model_set, gamma_col, u_window):
    """Per-step window block (Z_t, F_t) of the series-side quadratic.

    Parameters
    ----------
    model_set : ModelSet
    gamma_col : ndarray (K,)
        The weight column at step t.
    u_window : ndarray (dimu*(P+1),)
        The covariate window stacked newest first, (U_t, ..., U_{t-P}).
    """
    gamma_col = np.asarray(gamma_col, dtype=float).reshape(-1)
    u_window = np.asarray(u_window, dtype=float).reshape(-1)
    if gamma_col.shape[0] != model_set.K:
        raise ValueError("gamma column length must equal K")
    w = model_set.dimx * (model_set.n_lags_x + 1)
    Zt = np.zeros((w, w))
    Ft = np.zeros(w)
    for k, model in enumerate(model_set):
        ar = _stack_ar(model)
        gram = ar.T @ ar
        Zt += gamma_col[k] * 0.5 * (gram + gram.T)
        drive = model.offset + _stack_controls_newest_first(model) @ u_window
        Ft += gamma_col[k] * (-2.0) * (ar.T @ drive)
    return Zt, Ft


def assemble_qp_x(model_set, gamma, x, u):
    """Accumulate the window blocks into the full quadratic over dimx*T coordinates.

    The block at step t (t = t_st..T) covers the coordinates of X_{t-Q}..X_t,
    i.e. it is placed at flat offset (t-Q-1)*dimx.  ``x`` is accepted for
    shape validation only; the quadratic itself depends on gamma and u.
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
    if not np.isfinite(u).all():
        raise ValueError("covariate buffer must be complete")
    if T <= mem:
        raise ValueError("series shorter than the regression memory")

    w = dimx * (Q + 1)
    n_steps = T - mem
    g_eff = weights[:, mem:]

    grams = np.empty((K, w, w))
    for k, model in enumerate(model_set):
        ar = _stack_ar(model)
        gram = ar.T @ ar
        grams[k] = 0.5 * (gram + gram.T)
    Zt = np.einsum('kt,kij->tij', g_eff, grams)

    # covariate windows for all steps, newest first
    u_windows = np.concatenate([u[:, mem - p:T - p] for p in range(P + 1)], axis=0).T
    Ft = np.zeros((n_steps, w))
    for k, model in enumerate(model_set):
        drive = model.offset[None, :] + u_windows @ _stack_controls_newest_first(model).T
        Ft += g_eff[k][:, None] * (drive @ _stack_ar(model))
    Ft *= -2.0

    offsets = (np.arange(mem, T) - Q) * dimx
    rows = (offsets[:, None] + np.repeat(np.arange(w), w)[None, :]).ravel()
    cols = (offsets[:, None] + np.tile(np.arange(w), w)[None, :]).ravel()
    n = dimx * T
    H = sp.coo_matrix((Zt.reshape(n_steps, -1).ravel(), (rows, cols)), shape=(n, n)).tocsr()
    f = np.zeros(n)
    np.add.at(f, (offsets[:, None] + np.arange(w)[None, :]).ravel(), Ft.ravel())
    return AssembledQP(H, f)


def reduce_qp(qp, maps, observed_values):
    """Restrict the quadratic to the missing coordinates.

    The observed block folds into the linear term:
    H_miss = H[m, m] and f_miss = 2 * H[m, o] @ x_o + f[m].  An empty
    missing set yields a degenerate QP with n = 0.
    """
    m = maps.missing_indices
    o = maps.observed_indices
    if maps.n_total != qp.n:
        raise ValueError("reduction maps do not cover the QP coordinates")
    if m.size == 0:
        return AssembledQP(sp.csr_matrix((0, 0)), np.zeros(0))
    observed_values = np.asarray(observed_values, dtype=float).reshape(-1)
    if observed_values.shape[0] != o.size:
        raise ValueError("observed_values length must match the observed index set")
    rows = qp.H[m]
    H_mm = rows[:, m]
    H_mo = rows[:, o]
    f_miss = 2.0 * (H_mo @ observed_values) + qp.f[m]
    return AssembledQP(H_mm.tocsr(), f_miss)


def _lower_band(M, n):
    """Lower-triangular banded storage (LAPACK layout) of a sparse symmetric matrix."""
    tri = sp.tril(M, format='coo')
    if tri.nnz == 0:
        return np.zeros((1, n)), 0
    bandwidth = int((tri.row - tri.col).max())
    ab = np.zeros((bandwidth + 1, n))
    ab[tri.row - tri.col, tri.col] = tri.data
    return ab, bandwidth


def _banded_cholesky_solve(M, rhs):
    """Solve M x = rhs for PD banded M; returns (x, condition estimate)."""
    n = M.shape[0]
    ab, _ = _lower_band(M, n)
    factor = cholesky_banded(ab, lower=True)  # LinAlgError if not PD

    def apply_inverse(b):
        return cho_solve_banded((factor, True), b)

    anorm = np.abs(M).sum(axis=0).max() if M.nnz else 0.0
    if n == 1:
        inv_norm = float(apply_inverse(np.ones(1))[0])
    else:
        op = LinearOperator((n, n), matvec=apply_inverse, rmatvec=apply_inverse)
        inv_norm = onenormest(op)
    return apply_inverse(rhs), float(anorm * inv_norm)


def solve_missing(qp, ridge=0.0, x0=None, cond_limit=1e12, return_info=False):
    """Minimize x^T (H + ridge*I) x + f^T x over the missing coordinates.

    The minimizer solves 2 (H + ridge*I) x = -f.  The primary path is a
    banded Cholesky factorization with a one-norm condition estimate; if
    the matrix is not numerically positive definite or the estimate exceeds
    ``cond_limit``, a least-squares fallback is tried and a
    FemmNumericsWarning is emitted.  A QPSolveError advising a larger ridge
    is raised whenever no certified descent point can be produced: the
    fallback system is inconsistent (the quadratic is unbounded below), or
    an ``x0`` is supplied and the candidate does not improve on it.

    Parameters
    ----------
    qp : AssembledQP
        Reduced quadratic over the missing coordinates (n >= 1).
    ridge : float
        Nonnegative shrinkage multiplier added to the diagonal.
    x0 : ndarray, optional
        Current filling of the missing coordinates; used for the descent
        check and to keep coordinates the quadratic does not touch.
    cond_limit : float
        Condition estimate above which the primary path defers to the
        fallback.
    return_info : bool
        When True, also return a dict with the condition estimate and the
        path taken.
    """
    if qp.n < 1:
        raise ValueError("nothing to solve: the QP has no coordinates")
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    n = qp.n
    M = (qp.H + ridge * sp.identity(n, format='csr')).tocsr()
    f = qp.f
    info = {'n': n, 'ridge': float(ridge), 'fallback': False, 'cond_est': np.inf,
            'n_inactive': 0}

    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    if x.shape != (n,):
        raise ValueError("x0 length must match the QP")

    # coordinates never referenced by any window have an exactly zero row
    # (PSD: zero diagonal implies zero row); they stay at their current value
    diag = M.diagonal()
    active = diag != 0.0
    info['n_inactive'] = int(n - active.sum())
    if not active.all() and np.any(f[~active] != 0.0):
        raise QPSolveError(
            "linear term on untouched coordinates makes the quadratic unbounded "
            "below; increase the ridge multiplier")
    if not active.any():
        info['cond_est'] = 1.0
        return (x, info) if return_info else x
    if active.all():
        M_a, f_a = M, f
    else:
        idx = np.flatnonzero(active)
        M_a = M[idx][:, idx].tocsr()
        f_a = f[idx]

    sol = None
    try:
        sol, cond_est = _banded_cholesky_solve(M_a, -0.5 * f_a)
        info['cond_est'] = cond_est
        if cond_est > cond_limit:
            sol = None
    except np.linalg.LinAlgError:
        pass

    if sol is None:
        info['fallback'] = True
        warnings.warn(
            "reconstruction system is singular or ill conditioned "
            f"(condition estimate {info['cond_est']:.2e}); using a least-squares "
            "fallback, consider a larger ridge", FemmNumericsWarning, stacklevel=2)
        n_a = M_a.shape[0]
        if n_a > _DENSE_FALLBACK_MAX:
            raise QPSolveError(
                f"system of size {n_a} is not positive definite and too large for the "
                "dense fallback; increase the ridge multiplier")
        dense = M_a.toarray()
        sol, _, _, svals = lstsq(dense, -0.5 * f_a, lapack_driver='gelsd')
        if svals is not None and svals.size and svals[-1] > 0:
            info['cond_est'] = float(svals[0] / svals[-1]) if svals[-1] > 0 else np.inf
        # consistency: an inconsistent singular system means the quadratic is
        # unbounded below and no minimizer exists
        resid = np.linalg.norm(dense @ sol + 0.5 * f_a)
        scale = max(np.linalg.norm(0.5 * f_a), np.linalg.norm(dense @ sol), 1e-30)
        if resid > 1e-7 * scale:
            raise QPSolveError(
                "the reconstruction quadratic is unbounded below on the missing "
                "coordinates; increase the ridge multiplier")

    if active.all():
        x = sol
    else:
        x[np.flatnonzero(active)] = sol

    if x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        v_new = x @ (M @ x) + f @ x
        v_old = x0 @ (M @ x0) + f @ x0
        if v_new > v_old + 1e-9 * (1.0 + abs(v_old)):
            raise QPSolveError(
                "solver produced a non-descent point (value "
                f"{v_new:.6e} > {v_old:.6e}); increase the ridge multiplier")
    return (x, info) if return_info else x
