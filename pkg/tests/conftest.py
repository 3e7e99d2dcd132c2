"""Shared helpers: random problem instances and brute-force reference code."""

import numpy as np

from femmvarx import LocalModel, ModelSet


def random_model(rng, dimx, dimu, q_lags, p_lags, scale=0.2):
    """A random stable-ish local model; interaction entries stay small."""
    offset = rng.normal(size=dimx)
    inter = rng.normal(size=(q_lags, dimx, dimx)) * scale / max(q_lags, 1)
    ctrl = rng.normal(size=(p_lags + 1, dimx, dimu)) * scale
    return LocalModel(offset, inter, ctrl)


def random_model_set(rng, K=2, dimx=2, dimu=2, q_lags=1, p_lags=1, scale=0.2):
    return ModelSet([random_model(rng, dimx, dimu, q_lags, p_lags, scale)
                     for _ in range(K)])


def random_weights(rng, K, T):
    """Random column-stochastic weights (uniform on the simplex per column)."""
    if K == 1:
        return np.ones((1, T))
    return rng.dirichlet(np.ones(K), size=T).T


def loop_distance(model, x, u, t):
    """Plain-loop evaluation of the squared residual at 1-based step t."""
    i = t - 1
    r = x[:, i].astype(float).copy()
    r -= model.offset
    for q in range(1, model.n_lags_x + 1):
        r -= model.interactions[q - 1] @ x[:, i - q]
    for p in range(model.n_lags_u + 1):
        r -= model.controls[p] @ u[:, i - p]
    return sum(float(v) * float(v) for v in r)


def loop_objective(model_set, weights, x, u):
    """Plain-loop evaluation of the weighted objective."""
    t_st = model_set.t_st
    total = 0.0
    for t in range(t_st, x.shape[1] + 1):
        for k in range(model_set.K):
            total += weights[k, t - 1] * loop_distance(model_set[k], x, u, t)
    return total
