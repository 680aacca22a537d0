"""Synthetic symmetric low-rank instances for benchmarks and tests."""

from __future__ import annotations

import numpy as np

from .matrix import ShdiMatrix


def random_canonical_pairs(node_count: int, count: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Sample ``count`` distinct upper-triangular (row <= col) index pairs."""
    total = node_count * (node_count + 1) // 2
    if count > total:
        raise ValueError(f"cannot sample {count} pairs from {total}")
    flat = rng.choice(total, size=count, replace=False)
    flat.sort()
    # invert the row-major triangular index: offset(m) = m*n - m*(m-1)/2
    n = node_count
    m = np.floor((2 * n + 1 - np.sqrt((2 * n + 1) ** 2 - 8 * flat.astype(np.float64))) / 2).astype(np.int64)
    m = np.clip(m, 0, n - 1)
    offset = m * n - m * (m - 1) // 2
    # float rounding can land one row off; fix up both directions
    too_high = offset > flat
    while np.any(too_high):
        m[too_high] -= 1
        offset = m * n - m * (m - 1) // 2
        too_high = offset > flat
    next_offset = (m + 1) * n - (m + 1) * m // 2
    too_low = flat >= next_offset
    while np.any(too_low):
        m[too_low] += 1
        offset = m * n - m * (m - 1) // 2
        next_offset = (m + 1) * n - (m + 1) * m // 2
        too_low = flat >= next_offset
    col = m + (flat - offset)
    return m, col


def synthetic_low_rank(node_count: int, rank: int, observed_fraction: float,
                       seed: int, noise: float = 0.0, factor_scale: float = 1.0):
    """Generate a rank-``rank`` symmetric nonnegative matrix with a random
    subset of entries observed.

    Returns ``(matrix, true_factors)`` where ``true_factors`` is the
    |N| x rank nonnegative matrix whose Gram product generated the data.
    Optional nonnegative observation noise is additive Gaussian, clipped
    at zero.
    """
    if not 0 < observed_fraction <= 1:
        raise ValueError("observed_fraction must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    factors = rng.uniform(0.0, factor_scale, size=(node_count, rank))
    total = node_count * (node_count + 1) // 2
    count = max(1, int(round(observed_fraction * total)))
    rows, cols = random_canonical_pairs(node_count, count, rng)
    weights = np.einsum("ij,ij->i", factors[rows], factors[cols])
    if noise > 0:
        weights = np.maximum(0.0, weights + rng.normal(0.0, noise, size=len(weights)))
    matrix = ShdiMatrix(node_count, rows, cols, weights)
    return matrix, factors
