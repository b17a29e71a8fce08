"""Pure-NumPy kernels for regression-tree fitting and evaluation.

Drop-in fallback for the compiled module in ``_split_cy.pyx``; both must
produce bitwise-identical results. The scan accumulates prefix sums in the
same left-to-right order as the C loop (``np.cumsum`` is sequential), and
every score is a single elementwise IEEE expression, so float results match
the compiled kernel exactly.
"""

from __future__ import annotations

import numpy as np

NO_SPLIT = (-np.inf, -1, np.nan)


def best_split_scan(values: np.ndarray, targets: np.ndarray, min_leaf: int):
    """Find the best binary split of a pre-sorted feature column.

    ``values`` must be sorted ascending with ``targets`` aligned. Returns
    ``(score, n_left, threshold)`` where score = S_L^2/n_L + S_R^2/n_R
    (maximizing this maximizes variance reduction for a fixed parent), or
    ``NO_SPLIT`` when no cut satisfies ``min_leaf`` on both sides.
    """
    n = values.shape[0]
    if n < 2 * min_leaf:
        return NO_SPLIT

    csum = np.cumsum(targets)
    total = csum[-1]
    n_left = np.arange(1, n, dtype=np.float64)
    s_left = csum[:-1]
    s_right = total - s_left
    n_right = np.float64(n) - n_left
    score = s_left * s_left / n_left + s_right * s_right / n_right

    sizes = np.arange(1, n)
    valid = (values[:-1] < values[1:]) & (sizes >= min_leaf) & (sizes <= n - min_leaf)
    if not valid.any():
        return NO_SPLIT

    score = np.where(valid, score, -np.inf)
    cut = int(np.argmax(score))  # first occurrence wins ties, as in the C scan
    lo = values[cut]
    hi = values[cut + 1]
    threshold = (lo + hi) / 2.0
    if threshold >= hi:  # midpoint rounded up to hi; fall back to the left value
        threshold = lo
    return float(score[cut]), cut + 1, float(threshold)


def apply_tree(feature, threshold, left, right, value, x):
    """Route every row of ``x`` through one flat tree; returns leaf values."""
    n = x.shape[0]
    idx = np.zeros(n, dtype=np.int64)
    rows = np.arange(n)
    while True:
        feat = feature[idx]
        active = feat >= 0
        if not active.any():
            break
        cols = np.where(active, feat, 0)
        go_left = x[rows, cols] <= threshold[idx]
        nxt = np.where(go_left, left[idx], right[idx])
        idx = np.where(active, nxt, idx)
    return value[idx]
