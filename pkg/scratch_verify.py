"""Scratch: verify update rules against brute-force Lagrangian oracles."""
import math
import numpy as np

from symlf.config import TrainConfig
from symlf.matrix import ShdiMatrix
from symlf.state import FactorState, init_state, penalty_weights
from symlf.trainer import run_iteration, update_p, update_q, update_x, update_y


def lagrangian(matrix, S, lam):
    """Brute-force objective: data term over both orientations, degree-weighted
    L2, dual terms, penalty terms."""
    total = 0.0
    n = matrix.node_count
    for j in range(n):
        nbrs, ws = matrix.neighbors(j)
        for k, a in zip(nbrs, ws):
            r = a - sum(S.Q[j, l] * S.Y[k, l] for l in range(S.dim))
            total += 0.5 * r * r
        deg = len(nbrs)
        total += 0.5 * lam * deg * sum(S.Q[j, l] ** 2 + S.Y[j, l] ** 2 for l in range(S.dim))
    for j in range(n):
        for l in range(S.dim):
            total += S.U[j, l] * (S.Q[j, l] - S.P[j, l]) + 0.5 * S.theta1[j] * (S.Q[j, l] - S.P[j, l]) ** 2
            total += S.V[j, l] * (S.Y[j, l] - S.X[j, l]) + 0.5 * S.theta1[j] * (S.Y[j, l] - S.X[j, l]) ** 2
            total += S.W[j, l] * (S.P[j, l] - S.X[j, l]) + 0.5 * S.theta2[j] * (S.P[j, l] - S.X[j, l]) ** 2
    return total


def fd(matrix, S, lam, arr_name, m, d, h=1e-6):
    arr = getattr(S, arr_name)
    old = arr[m, d]
    arr[m, d] = old + h
    up = lagrangian(matrix, S, lam)
    arr[m, d] = old - h
    dn = lagrangian(matrix, S, lam)
    arr[m, d] = old
    return (up - dn) / (2 * h)


rng = np.random.default_rng(42)
bad = 0
for trial in range(30):
    n = int(rng.integers(3, 9))
    density = 0.5
    pairs = [(i, j) for i in range(n) for j in range(i, n) if rng.random() < density]
    if not pairs:
        continue
    entries = [(i, j, float(rng.uniform(0, 2))) for i, j in pairs]
    mat = ShdiMatrix.from_entries(entries, node_count=n)
    cfg = TrainConfig(dim=int(rng.integers(1, 4)), lam=0.07, beta1=0.11, beta2=0.09, seed=trial)
    S = init_state(mat, cfg)
    # random: make it a mid-training-like state
    S.Q += rng.normal(0, 0.5, S.Q.shape); S.Y += rng.normal(0, 0.5, S.Y.shape)
    S.P = np.abs(rng.normal(0, 0.5, S.P.shape)); S.X = np.abs(rng.normal(0, 0.5, S.X.shape))
    S.U += rng.normal(0, 0.3, S.U.shape); S.V += rng.normal(0, 0.3, S.V.shape); S.W += rng.normal(0, 0.3, S.W.shape)

    m = int(rng.integers(0, n)); d = int(rng.integers(0, cfg.dim))
    update_q(S, mat, cfg, m, d)
    g = fd(mat, S, cfg.lam, "Q", m, d)
    if abs(g) > 1e-6: print("q grad", g); bad += 1
    update_y(S, mat, cfg, m, d)
    g = fd(mat, S, cfg.lam, "Y", m, d)
    if abs(g) > 1e-6: print("y grad", g); bad += 1
    v = update_p(S, cfg, m, d)
    g = fd(mat, S, cfg.lam, "P", m, d)
    if v > 0 and abs(g) > 1e-6: print("p grad", g); bad += 1
    if v == 0 and g < -1e-6: print("p one-sided", g); bad += 1
    v = update_x(S, cfg, m, d)
    g = fd(mat, S, cfg.lam, "X", m, d)
    if v > 0 and abs(g) > 1e-6: print("x grad", g); bad += 1
    if v == 0 and g < -1e-6: print("x one-sided", g); bad += 1

print("stationarity failures:", bad)

# transcript: vectorized run_iteration vs sequential scalar updates
for trial in range(10):
    n = 6
    pairs = [(i, j) for i in range(n) for j in range(i, n) if rng.random() < 0.6]
    entries = [(i, j, float(rng.uniform(0, 2))) for i, j in pairs]
    mat = ShdiMatrix.from_entries(entries, node_count=n)
    cfg = TrainConfig(dim=3, lam=0.05, beta1=0.05, beta2=0.05, seed=trial)
    S1 = init_state(mat, cfg)
    for w in range(2):  # some burn-in so states differ from init
        run_iteration(S1, mat, cfg)
    S2 = S1.copy()
    run_iteration(S1, mat, cfg)
    # sequential oracle
    for d in range(cfg.dim):
        for m in range(n):
            update_q(S2, mat, cfg, m, d)
        for m in range(n):
            update_y(S2, mat, cfg, m, d)
        for m in range(n):
            update_p(S2, cfg, m, d)
        for m in range(n):
            update_x(S2, cfg, m, d)
        from symlf.trainer import update_duals
        update_duals(S2, cfg, d)
    for name in FactorState.ARRAY_NAMES:
        diff = np.max(np.abs(getattr(S1, name) - getattr(S2, name)))
        if diff > 1e-9:
            print("transcript mismatch", name, diff)
print("transcript check done")
