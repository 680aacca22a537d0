"""Prediction-accuracy metrics."""

from __future__ import annotations

import numpy as np


def rmse(truth, predictions) -> float:
    """Root mean square error between observed and predicted values.

    ``truth`` may be a sequence of values or of (row, col, value) triples;
    ``predictions`` is the aligned sequence of predicted values.  Empty
    input is rejected rather than returning NaN.
    """
    t = np.asarray(truth, dtype=np.float64)
    if t.ndim == 2 and t.shape[1] == 3:
        t = t[:, 2]
    p = np.asarray(predictions, dtype=np.float64)
    if t.ndim != 1 or p.ndim != 1:
        raise ValueError("rmse expects flat value sequences")
    if len(t) == 0:
        raise ValueError("rmse of an empty set is undefined")
    if len(t) != len(p):
        raise ValueError(f"length mismatch: {len(t)} truths vs {len(p)} predictions")
    diff = t - p
    return float(np.sqrt(diff @ diff / len(t)))
