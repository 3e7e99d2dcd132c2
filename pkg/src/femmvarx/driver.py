"""Multi-restart alternating optimization over weights, models and missing values.

One restart runs the four-step sweep: (1) weight LP, (2) missing-value QP
in the target series, (3) missing-value QP in the covariates, (4) weighted
least squares per local model; the first model estimate precedes the loop.
Each step exactly minimizes the penalized objective

    L(theta, gamma, x, u) + ridge_x * ||X_miss||^2 + ridge_u * ||U_miss||^2

over its own block, so the recorded objective trace is non-increasing.
Restarts draw independent initializations from seeds derived
deterministically from the configured seed, and the restart with the
smallest final objective wins.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from . import gamma_step, qp_u, qp_x, theta_step
from .core import (FemmError, FemmNumericsWarning, ModelSet, SwitchingWeights,
                   TimeSeriesWithMask, objective)


class FitFailedError(FemmError):
    """Every restart of the alternating optimization failed."""


@dataclass
class FitResult:
    """Outcome of one fit: parameters, filled buffers and the objective trace."""

    model_set: ModelSet
    gamma: SwitchingWeights
    x_filled: np.ndarray
    u_filled: np.ndarray
    objective_trace: np.ndarray
    restart_index: int
    converged: bool
    warnings: list = field(default_factory=list)

    @property
    def objective(self):
        return float(self.objective_trace[-1])


def interpolate_missing(values, mask):
    """Fill masked entries per dimension by linear interpolation in time.

    Leading and trailing gaps take the nearest observed value.  A fully
    missing dimension cannot be interpolated and raises a ValueError.
    """
    values = np.asarray(values, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if values.shape != mask.shape:
        raise ValueError("values and mask must have identical shape")
    out = values.copy()
    t_all = np.arange(values.shape[1])
    for d in range(values.shape[0]):
        obs = ~mask[d]
        if not obs.any():
            raise ValueError(f"dimension {d} has no observed values to interpolate from")
        if obs.all():
            continue
        out[d, mask[d]] = np.interp(t_all[mask[d]], t_all[obs], values[d, obs])
    return out


def random_feasible_weights(rng, K, T, c_bound, effective_from=0):
    """A random weight field satisfying the simplex and variation constraints.

    Piecewise constant in time: a field with s segments has per-row
    variation at most s - 1, so drawing s <= 1 + floor(C) keeps every row
    inside the variation budget.  Each segment's column is either a vertex
    (one regime) or a uniform-simplex draw; the vertex draws give the first
    model estimates crisp regime contrast, the soft draws keep every model
    in play.  Fields leaving some model without weight on the effective
    columns (from ``effective_from`` on, where the regression is defined)
    are redrawn.
    """
    if K == 1:
        return np.ones((1, T))
    max_segments = int(min(1 + math.floor(c_bound), T))
    bounds = np.array([0, T])
    for _ in range(256):
        n_segments = int(rng.integers(1, max_segments + 1))
        cuts = (np.sort(rng.choice(np.arange(1, T), size=n_segments - 1, replace=False))
                if n_segments > 1 else np.empty(0, dtype=int))
        bounds = np.concatenate([[0], cuts, [T]])
        gamma0 = np.empty((K, T))
        for left, right in zip(bounds[:-1], bounds[1:]):
            if rng.random() < 0.5:
                column = np.zeros(K)
                column[int(rng.integers(K))] = 1.0
            else:
                column = rng.dirichlet(np.ones(K))
            gamma0[:, left:right] = column[:, None]
        if (gamma0[:, effective_from:].sum(axis=1) > 1e-9).all():
            return gamma0
    # a vertex-free draw is always viable
    gamma0 = np.empty((K, T))
    for left, right in zip(bounds[:-1], bounds[1:]):
        gamma0[:, left:right] = rng.dirichlet(np.ones(K))[:, None]
    return gamma0


def initialize(x, u, config, restart_seed):
    """Draw a random weight field and interpolation fillings for one restart.

    The weight field is piecewise constant with uniform-simplex segment
    values, respecting both the simplex and the variation budget C
    (all-ones for K = 1); missing series entries are filled by
    per-dimension linear interpolation with constant extrapolation at the
    edges.  The result is deterministic given ``restart_seed``.
    """
    rng = np.random.default_rng(restart_seed)
    T = x.T
    if u.T != T:
        raise ValueError("x and u must cover the same time steps")
    gamma0 = random_feasible_weights(rng, config.K, T, config.C,
                                     effective_from=config.mem)
    x0 = interpolate_missing(x.values, x.mask)
    u0 = interpolate_missing(u.values, u.mask)
    return gamma0, x0, u0


def _penalized_objective(model_set, gamma, xf, uf, x_mask, u_mask, config):
    total = objective(model_set, gamma, xf, uf)
    if config.ridge_x and x_mask.any():
        total += config.ridge_x * float(np.square(xf[x_mask]).sum())
    if config.ridge_u and u_mask.any():
        total += config.ridge_u * float(np.square(uf[u_mask]).sum())
    return total


def _theta_update(design, targets, gamma, config, previous, warn_sink):
    """Per-cluster weighted least squares; keeps a cluster's previous model
    when its total weight vanishes."""
    models = []
    for k in range(config.K):
        w = gamma[k, config.mem:]
        if w.sum() < 1e-12:
            if previous is None:
                raise theta_step.EmptyClusterError(
                    f"cluster {k} received no weight at initialization")
            warn_sink.append(f"cluster {k} is empty; keeping its previous model")
            models.append(previous[k])
            continue
        warm = previous[k].coefficient_matrix() if previous is not None else None
        models.append(theta_step.solve_theta(
            design, targets, w, config.Q, config.P,
            lasso_bound=config.lasso_bound, warm_start=warm))
    return ModelSet(models)


def alternate(x, u, config, init, restart_index=0):
    """Run the four-step alternating optimization from one initialization.

    ``init`` is the (gamma0, x_filled0, u_filled0) triple produced by
    :func:`initialize`.  The sweep loop stops when the relative decrease of
    the penalized objective over a full sweep falls below ``config.tol`` or
    after ``config.max_alternate`` sweeps.
    """
    if not isinstance(x, TimeSeriesWithMask):
        x = TimeSeriesWithMask.from_array(x)
    if not isinstance(u, TimeSeriesWithMask):
        u = TimeSeriesWithMask.from_array(u)
    gamma0, xf, uf = init
    gamma = np.array(gamma0, dtype=float)
    xf = np.array(xf, dtype=float)
    uf = np.array(uf, dtype=float)
    # the filled buffers must agree with the observations exactly
    xf[~x.mask] = x.values[~x.mask]
    uf[~u.mask] = u.values[~u.mask]

    t_st = config.t_st
    x_missing = bool(x.mask.any())
    u_missing = bool(u.mask.any())
    maps_x = qp_x.ReductionMaps.from_mask(x.mask) if x_missing else None
    maps_u = qp_x.ReductionMaps.from_mask(u.mask) if u_missing else None
    x_obs = x.values.T.ravel()[maps_x.observed_indices] if x_missing else None
    u_obs = u.values.T.ravel()[maps_u.observed_indices] if u_missing else None

    notes = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", FemmNumericsWarning)

        design, targets = theta_step.build_design(xf, uf, config.Q, config.P)
        theta = _theta_update(design, targets, gamma, config, None, notes)
        trace = [_penalized_objective(theta, gamma, xf, uf, x.mask, u.mask, config)]
        sweep_end = trace[0]
        converged = False

        for _ in range(config.max_alternate):
            # Step 1: weight field
            dist = gamma_step.distance_matrix(theta, xf, uf)
            gamma = gamma_step.solve_gamma(dist, config.C, t_st).weights
            trace.append(_penalized_objective(theta, gamma, xf, uf, x.mask, u.mask, config))

            # Step 2: missing values in the target series
            if x_missing:
                qp = qp_x.assemble_qp_x(theta, gamma, xf, uf)
                red = qp_x.reduce_qp(qp, maps_x, x_obs)
                flat = xf.T.ravel()
                sol = qp_x.solve_missing(red, config.ridge_x, x0=flat[maps_x.missing_indices])
                flat[maps_x.missing_indices] = sol
                xf = np.ascontiguousarray(flat.reshape(x.T, x.dim).T)
                trace.append(_penalized_objective(theta, gamma, xf, uf, x.mask, u.mask, config))

            # Step 3: missing values in the covariates
            if u_missing:
                qp = qp_u.assemble_qp_u(theta, gamma, xf, uf)
                red = qp_u.reduce_qp(qp, maps_u, u_obs)
                flat = uf.T.ravel()
                sol = qp_u.solve_missing(red, config.ridge_u, x0=flat[maps_u.missing_indices])
                flat[maps_u.missing_indices] = sol
                uf = np.ascontiguousarray(flat.reshape(u.T, u.dim).T)
                trace.append(_penalized_objective(theta, gamma, xf, uf, x.mask, u.mask, config))

            # Step 4: local models
            design, targets = theta_step.build_design(xf, uf, config.Q, config.P)
            theta = _theta_update(design, targets, gamma, config, theta, notes)
            trace.append(_penalized_objective(theta, gamma, xf, uf, x.mask, u.mask, config))

            rel_decrease = (sweep_end - trace[-1]) / max(abs(sweep_end), 1e-300)
            sweep_end = trace[-1]
            if rel_decrease <= config.tol:
                converged = True
                break

    notes.extend(str(w.message) for w in caught)
    return FitResult(theta, SwitchingWeights(gamma), xf, uf,
                     np.asarray(trace), restart_index, converged, notes)


def _run_restart(x, u, config, index):
    seed = np.random.SeedSequence(config.seed, spawn_key=(index,))
    try:
        init = initialize(x, u, config, seed)
        return alternate(x, u, config, init, restart_index=index)
    except (FemmError, np.linalg.LinAlgError) as exc:
        return (index, repr(exc))


def fit(x, u, config, n_jobs=1):
    """Run ``config.max_restart`` independent restarts and keep the best.

    Restart seeds derive deterministically from ``config.seed``, so the
    result is reproducible and independent of execution order; restarts may
    run in parallel (``n_jobs``).  A restart that fails contributes a
    warning instead of a result; if every restart fails a FitFailedError
    with the collected diagnostics is raised.
    """
    if not isinstance(x, TimeSeriesWithMask):
        x = TimeSeriesWithMask.from_array(x)
    if not isinstance(u, TimeSeriesWithMask):
        u = TimeSeriesWithMask.from_array(u)
    if x.T != u.T:
        raise ValueError("x and u must cover the same time steps")

    indices = range(config.max_restart)
    if n_jobs != 1 and config.max_restart > 1:
        outcomes = Parallel(n_jobs=n_jobs)(
            delayed(_run_restart)(x, u, config, i) for i in indices)
    else:
        outcomes = [_run_restart(x, u, config, i) for i in indices]

    failures = [o for o in outcomes if isinstance(o, tuple)]
    results = [o for o in outcomes if isinstance(o, FitResult)]
    if not results:
        detail = "; ".join(f"restart {i}: {msg}" for i, msg in failures)
        raise FitFailedError(f"all {config.max_restart} restarts failed: {detail}")
    best = min(results, key=lambda r: (r.objective, r.restart_index))
    best.warnings = list(best.warnings)
    best.warnings.extend(f"restart {i} failed: {msg}" for i, msg in failures)
    return best
