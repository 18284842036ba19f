"""Independent brute-force oracles shared by the unit and acceptance tests.

Everything here is written against the plain definitions (exhaustive search,
pairwise comparisons, explicit threshold sweeps) and never calls the code
paths it checks.
"""

import numpy as np


def greedy_oracle(a_star, win_h, win_w, k, zeta):
    """Exhaustive greedy selection on a (D, h, w) map.

    Each round scans every (d, i, j) window position, summing the window
    directly; the maximum with lexicographically smallest (d, i, j) wins,
    then the window footprint is zeroed across +-zeta slices.
    """
    a = np.array(a_star, dtype=np.float64)
    depth, h, w = a.shape
    picks = []
    for _ in range(k):
        best, best_pos = None, None
        for d in range(depth):
            for i in range(h - win_h + 1):
                for j in range(w - win_w + 1):
                    s = a[d, i : i + win_h, j : j + win_w].sum()
                    if best is None or s > best:
                        best, best_pos = s, (d, i, j)
        d, i, j = best_pos
        picks.append(best_pos)
        lo, hi = max(0, d - zeta), min(depth - 1, d + zeta)
        a[lo : hi + 1, i : i + win_h, j : j + win_w] = 0.0
    return picks


def greedy_oracle_2d(a_star_2d, win_h, win_w, k):
    """Single-slice greedy selection (the depth-free special case)."""
    picks = greedy_oracle(a_star_2d[None, :, :], win_h, win_w, k, zeta=0)
    return [(i, j) for _, i, j in picks]


def top_mean_oracle(values_lex, n):
    """Mean of the n largest values; ties keep earlier (lexicographic) order.

    `values_lex` must already be flattened in (d, i, j) order.
    """
    values = np.asarray(values_lex, dtype=np.float64)
    order = np.argsort(-values, kind="stable")
    return values[order[:n]].mean()


def auc_pairwise(scores, labels):
    """AUC as the mean pairwise comparison with half credit for ties."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    pos = scores[labels]
    neg = scores[~labels]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


def dsc_sweep_oracle(saliency, truth):
    """Best Dice over every distinct binarization threshold (>= rule)."""
    sal = np.asarray(saliency, dtype=np.float64).ravel()
    truth = np.asarray(truth).astype(bool).ravel()
    best = 0.0
    for thr in np.unique(sal):
        pred = sal >= thr
        denom = pred.sum() + truth.sum()
        best = max(best, 2.0 * (pred & truth).sum() / denom)
    return best


def pxap_sweep_oracle(saliency, truth):
    """Average precision by explicit threshold sweep over unique values."""
    sal = np.asarray(saliency, dtype=np.float64).ravel()
    truth = np.asarray(truth).astype(bool).ravel()
    n_pos = truth.sum()
    thresholds = np.sort(np.unique(sal))[::-1]
    ap, prev_recall = 0.0, 0.0
    for thr in thresholds:
        pred = sal >= thr
        tp = (pred & truth).sum()
        precision = tp / pred.sum()
        recall = tp / n_pos
        ap += (recall - prev_recall) * precision
        prev_recall = recall
    return ap


def mcc_oracle(tp, fn, fp, tn):
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom == 0:
        return 0.0
    return (tp * tn - fp * fn) / np.sqrt(denom)


def sensitivity_sweep_oracle(scores, labels, target):
    """Threshold with sensitivity closest to target, by full enumeration."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    candidates = list(np.unique(scores)) + [np.max(scores) + 1.0]
    best_thr, best_key = None, None
    for thr in candidates:
        sens = (scores[labels] >= thr).mean()
        key = (abs(sens - target), -sens)
        if best_key is None or key < best_key:
            best_key, best_thr = key, thr
    return best_thr


def rasterized_lesion_counts(radius, axis_scales, depth_squash, offsets, size=32):
    """Voxel counts of the generator's ellipsoid at given center offsets.

    Returns the list of counts for each (axis_scale, offset) combination;
    min/max over a dense sweep bound what the generator can produce.
    """
    counts = []
    grid = np.arange(size, dtype=np.float64)
    yy, xx, zz = np.meshgrid(grid, grid, grid, indexing="ij")
    c = size / 2
    for a in axis_scales:
        for oy, ox, oz in offsets:
            rho = np.sqrt(
                ((yy - c - oy) / a) ** 2
                + ((xx - c - ox) / a) ** 2
                + ((zz - c - oz) * depth_squash) ** 2
            )
            counts.append(int((rho <= radius).sum()))
    return counts
