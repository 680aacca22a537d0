"""Plain nonnegative latent-factor baseline.

Element-wise alternating least squares with nonnegative truncation on the
unconstrained two-factor objective: no auxiliary factors, no duals, no
symmetry coupling.  Rows with no observed entries are left untouched (their
update would divide by zero).  Serves as the in-repo comparison point and
is reported as "NLF", never as a reimplementation of any published system.
"""

from __future__ import annotations

import numpy as np

from .config import TrainConfig
from .errors import DivergenceError
from .matrix import ShdiMatrix
from .state import NlfState
from .trainer import _edge_dots


def nlf_update_sweep(state: NlfState, matrix: ShdiMatrix, config: TrainConfig,
                     iteration: int = 0, recorder=None) -> NlfState:
    """One full pass: for each dimension, update column d of P, then of X.

    Each element update is the exact nonnegativity-projected minimizer of
    its one-dimensional objective slice, so the objective never increases.
    """
    n = matrix.node_count
    rows, cols = matrix.adj_rows, matrix.adj_cols
    vals, mirror = matrix.adj_weights, matrix.adj_mirror
    deg = matrix.degrees.astype(np.float64)
    live = deg > 0
    if recorder is not None:
        recorder.update(matrix.entry_ids)

    P, X = state.P, state.X
    lam = config.lam

    dot = _edge_dots(P, X, rows, cols)
    for d in range(config.dim):
        xd = X[cols, d]
        partial = vals - dot + P[rows, d] * xd
        numer = np.bincount(rows, partial * xd, minlength=n)
        denom = np.bincount(rows, xd * xd, minlength=n) + lam * deg
        p_new = np.where(
            live, np.maximum(0.0, numer / np.where(live, denom, 1.0)), P[:, d]
        )
        dot += (p_new - P[:, d])[rows] * xd
        P[:, d] = p_new

        pd = P[cols, d]
        partial = vals - dot[mirror] + pd * X[rows, d]
        numer = np.bincount(rows, partial * pd, minlength=n)
        denom = np.bincount(rows, pd * pd, minlength=n) + lam * deg
        x_new = np.where(
            live, np.maximum(0.0, numer / np.where(live, denom, 1.0)), X[:, d]
        )
        dot += P[rows, d] * (x_new - X[:, d])[cols]
        X[:, d] = x_new

    for name in state.ARRAY_NAMES:
        if not np.all(np.isfinite(getattr(state, name))):
            raise DivergenceError(iteration, name)
    return state


def nlf_update_p(state: NlfState, matrix: ShdiMatrix, config: TrainConfig,
                 m: int, d: int) -> float:
    """Scalar reference update for one element of P."""
    nbrs, weights = matrix.neighbors(m)
    if len(nbrs) == 0:
        return float(state.P[m, d])
    resid = weights - state.P[m] @ state.X[nbrs].T + state.P[m, d] * state.X[nbrs, d]
    numer = resid @ state.X[nbrs, d]
    denom = state.X[nbrs, d] @ state.X[nbrs, d] + config.lam * len(nbrs)
    value = max(0.0, numer / denom)
    state.P[m, d] = value
    return value


def nlf_update_x(state: NlfState, matrix: ShdiMatrix, config: TrainConfig,
                 m: int, d: int) -> float:
    """Scalar reference update for one element of X (column adjacency)."""
    nbrs, weights = matrix.neighbors(m)
    if len(nbrs) == 0:
        return float(state.X[m, d])
    resid = weights - state.P[nbrs] @ state.X[m] + state.P[nbrs, d] * state.X[m, d]
    numer = resid @ state.P[nbrs, d]
    denom = state.P[nbrs, d] @ state.P[nbrs, d] + config.lam * len(nbrs)
    value = max(0.0, numer / denom)
    state.X[m, d] = value
    return value
