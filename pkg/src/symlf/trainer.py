"""Constrained trainer: element-wise updates and the per-dimension schedule.

One outer iteration walks the latent dimensions d = 0..D-1 in order and,
for each, runs three jobs:

* Job One  - closed-form least-squares update of column d of Q, then of Y.
  The Q pass reads Y as it stood at pass start; the Y pass reads the fresh
  Q column.  Within a pass, rows are mutually independent (a row update
  never reads another row's value in the column being written), so the
  vectorized passes below are exactly equivalent to sequential row updates.
* Job Two  - truncated closed-form update of column d of P, then of X
  (the X update reads the fresh P column).
* Job Three - dual ascent on U, V, W for column d.

Every denominator carries a per-row penalty weight that is strictly
positive (see :func:`symlf.state.penalty_weights`), so no update can
divide by zero, even for rows with no observed entries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import TrainConfig
from .errors import DivergenceError
from .matrix import ShdiMatrix
from .metrics import rmse
from .state import FactorState


@dataclass
class IterationDiagnostics:
    """End-of-iteration constraint residuals and training-set RMSE."""

    residual_qp: float
    residual_yx: float
    residual_px: float
    train_rmse: float


# -- scalar element updates ---------------------------------------------------
#
# Direct transliterations of the closed-form coordinate minimizers.  The
# vectorized column passes in run_iteration are the fast path; these exist
# as the reference element-level contract and mutate exactly one entry.


def update_q(state: FactorState, matrix: ShdiMatrix, config: TrainConfig,
             m: int, d: int) -> float:
    nbrs, weights = matrix.neighbors(m)
    t1 = state.theta1[m]
    resid = weights - state.Q[m] @ state.Y[nbrs].T + state.Q[m, d] * state.Y[nbrs, d]
    numer = resid @ state.Y[nbrs, d] + t1 * state.P[m, d] - state.U[m, d]
    denom = state.Y[nbrs, d] @ state.Y[nbrs, d] + config.lam * len(nbrs) + t1
    value = numer / denom
    state.Q[m, d] = value
    return value


def update_y(state: FactorState, matrix: ShdiMatrix, config: TrainConfig,
             m: int, d: int) -> float:
    nbrs, weights = matrix.neighbors(m)
    t1 = state.theta1[m]
    resid = weights - state.Q[nbrs] @ state.Y[m] + state.Q[nbrs, d] * state.Y[m, d]
    numer = resid @ state.Q[nbrs, d] + t1 * state.X[m, d] - state.V[m, d]
    denom = state.Q[nbrs, d] @ state.Q[nbrs, d] + config.lam * len(nbrs) + t1
    value = numer / denom
    state.Y[m, d] = value
    return value


def update_p(state: FactorState, config: TrainConfig, m: int, d: int) -> float:
    t1, t2 = state.theta1[m], state.theta2[m]
    value = max(
        0.0,
        (t1 * state.Q[m, d] + t2 * state.X[m, d] + state.U[m, d] - state.W[m, d])
        / (t1 + t2),
    )
    state.P[m, d] = value
    return value


def update_x(state: FactorState, config: TrainConfig, m: int, d: int) -> float:
    t1, t2 = state.theta1[m], state.theta2[m]
    value = max(
        0.0,
        (t1 * state.Y[m, d] + t2 * state.P[m, d] + state.V[m, d] + state.W[m, d])
        / (t1 + t2),
    )
    state.X[m, d] = value
    return value


def update_duals(state: FactorState, config: TrainConfig, d: int):
    """Dual gradient ascent for column d, all rows at once."""
    step1 = config.eta * state.theta1
    step2 = config.eta * state.theta2
    state.U[:, d] += step1 * (state.Q[:, d] - state.P[:, d])
    state.V[:, d] += step1 * (state.Y[:, d] - state.X[:, d])
    state.W[:, d] += step2 * (state.P[:, d] - state.X[:, d])


# -- full iteration -----------------------------------------------------------


def _edge_dots(Q, Y, rows, cols):
    """Per-slot products sum_l Q[row, l] * Y[col, l], accumulated column-wise
    to avoid materializing slot-by-dim intermediates."""
    dot = np.zeros(len(rows))
    for l in range(Q.shape[1]):
        dot += Q[rows, l] * Y[cols, l]
    return dot


def check_finite(state, iteration: int):
    for name in state.ARRAY_NAMES:
        if not np.all(np.isfinite(getattr(state, name))):
            raise DivergenceError(iteration, name)


def train_rmse_of(state, matrix: ShdiMatrix) -> float:
    preds = state.predict_pairs(matrix.ent_rows, matrix.ent_cols)
    return rmse(matrix.ent_weights, preds)


def run_iteration(state: FactorState, matrix: ShdiMatrix, config: TrainConfig,
                  iteration: int = 0, recorder=None) -> IterationDiagnostics:
    """One full pass of the three-job schedule over all dimensions.

    Mutates ``state`` in place.  Raises :class:`DivergenceError` if any
    parameter block picked up a non-finite value.  ``recorder``, when
    given, collects the canonical entry ids the update rules read.
    """
    n = matrix.node_count
    rows, cols = matrix.adj_rows, matrix.adj_cols
    vals, mirror = matrix.adj_weights, matrix.adj_mirror
    deg = matrix.degrees.astype(np.float64)
    if recorder is not None:
        recorder.update(matrix.entry_ids)

    Q, Y, P, X = state.Q, state.Y, state.P, state.X
    U, V, W = state.U, state.V, state.W
    t1, t2 = state.theta1, state.theta2
    lam, eta = config.lam, config.eta

    dot = _edge_dots(Q, Y, rows, cols)
    for d in range(config.dim):
        # Job One: Q column, then Y column.
        yd = Y[cols, d]
        partial = vals - dot + Q[rows, d] * yd
        numer = np.bincount(rows, partial * yd, minlength=n) + t1 * P[:, d] - U[:, d]
        denom = np.bincount(rows, yd * yd, minlength=n) + lam * deg + t1
        q_new = numer / denom
        dot += (q_new - Q[:, d])[rows] * yd
        Q[:, d] = q_new

        qd = Q[cols, d]
        partial = vals - dot[mirror] + qd * Y[rows, d]
        numer = np.bincount(rows, partial * qd, minlength=n) + t1 * X[:, d] - V[:, d]
        denom = np.bincount(rows, qd * qd, minlength=n) + lam * deg + t1
        y_new = numer / denom
        dot += Q[rows, d] * (y_new - Y[:, d])[cols]
        Y[:, d] = y_new

        # Job Two: P column (reads old X), then X column (reads fresh P).
        P[:, d] = np.maximum(
            0.0, (t1 * Q[:, d] + t2 * X[:, d] + U[:, d] - W[:, d]) / (t1 + t2)
        )
        X[:, d] = np.maximum(
            0.0, (t1 * Y[:, d] + t2 * P[:, d] + V[:, d] + W[:, d]) / (t1 + t2)
        )

        # Job Three: dual ascent for this column.
        U[:, d] += eta * t1 * (Q[:, d] - P[:, d])
        V[:, d] += eta * t1 * (Y[:, d] - X[:, d])
        W[:, d] += eta * t2 * (P[:, d] - X[:, d])

    check_finite(state, iteration)
    return IterationDiagnostics(
        residual_qp=float(np.max(np.abs(Q - P))) if n else 0.0,
        residual_yx=float(np.max(np.abs(Y - X))) if n else 0.0,
        residual_px=float(np.max(np.abs(P - X))) if n else 0.0,
        train_rmse=train_rmse_of(state, matrix),
    )
