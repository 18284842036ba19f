"""Pure-NumPy greedy window selection, the fallback for the compiled kernel.

Semantics are identical to the Cython extension: K rounds of argmax over
per-slice windowed sums of the combined saliency map, zeroing the selected
window across +-zeta neighboring slices after each pick. Ties resolve to the
lexicographically smallest (d, i, j), which is the first occurrence in C
order.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _window_sums(a, win_h, win_w):
    """(n, h, w) -> (n, h-win_h+1, w-win_w+1) sums over each window."""
    view = sliding_window_view(a, (win_h, win_w), axis=(1, 2))
    return view.sum(axis=(-2, -1))


def greedy_select(a_star, win_h, win_w, k, zeta):
    """Select `k` windows greedily from a (D, h, w) map.

    Returns (picks, scores): picks is (k, 3) int64 rows (d, i, j) of window
    top-left corners in saliency-grid units; scores are the windowed sums at
    selection time. `zeta` is the suppression half-width in slices.
    """
    a = np.ascontiguousarray(a_star, dtype=np.float64).copy()
    depth, h, w = a.shape
    if win_h > h or win_w > w:
        raise ValueError(f"window {win_h}x{win_w} larger than slice {h}x{w}")
    sums = _window_sums(a, win_h, win_w)
    picks = np.empty((k, 3), dtype=np.int64)
    scores = np.empty(k, dtype=np.float64)
    for n in range(k):
        d, i, j = np.unravel_index(np.argmax(sums), sums.shape)
        picks[n] = (d, i, j)
        scores[n] = sums[d, i, j]
        lo = max(0, d - zeta)
        hi = min(depth - 1, d + zeta)
        a[lo : hi + 1, i : i + win_h, j : j + win_w] = 0.0
        sums[lo : hi + 1] = _window_sums(a[lo : hi + 1], win_h, win_w)
    return picks, scores
