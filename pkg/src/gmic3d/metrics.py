"""Classification and weakly-supervised segmentation metrics.

All metrics are plain functions over score/label arrays, each checked
against brute-force oracles in the test suite. Confidence intervals come
from the percentile bootstrap (1,000 iterations by default); the resampling
unit is the group for group-wise metrics and the image otherwise.
"""

import numpy as np
from scipy.stats import rankdata


class UndefinedMetricError(ValueError):
    """Raised when a metric is undefined for the given inputs."""


def auc(scores, labels):
    """Rank-based AUC with tie correction (Mann-Whitney U / (n+ * n-))."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(int)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both classes present")
    ranks = rankdata(scores)
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def sensitivity_at(scores, labels, threshold):
    scores = np.asarray(scores)
    labels = np.asarray(labels).astype(bool)
    if not labels.any():
        raise UndefinedMetricError("sensitivity needs positives")
    return float((scores[labels] >= threshold).mean())


def specificity_at(scores, labels, threshold):
    scores = np.asarray(scores)
    labels = np.asarray(labels).astype(bool)
    if labels.all():
        raise UndefinedMetricError("specificity needs negatives")
    return float((scores[~labels] < threshold).mean())


def threshold_at_sensitivity(scores, labels, target=0.90):
    """Threshold (score >= threshold is positive) whose sensitivity is
    closest to `target`; among equally close candidates the higher
    sensitivity wins.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    if not labels.any():
        raise UndefinedMetricError("no positives: sensitivity threshold undefined")
    candidates = np.unique(scores)
    candidates = np.append(candidates, candidates[-1] + 1.0)  # sensitivity 0
    best_thr, best_key = None, None
    for thr in candidates:
        sens = (scores[labels] >= thr).mean()
        key = (abs(sens - target), -sens)
        if best_key is None or key < best_key:
            best_key, best_thr = key, thr
    return float(best_thr)


def mcc_at_threshold(scores, labels, threshold):
    """Matthews correlation of the thresholded prediction; 0 when any
    confusion-matrix margin is empty."""
    scores = np.asarray(scores)
    labels = np.asarray(labels).astype(bool)
    pred = scores >= threshold
    tp = int((pred & labels).sum())
    tn = int((~pred & ~labels).sum())
    fp = int((pred & ~labels).sum())
    fn = int((~pred & labels).sum())
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom == 0:
        return 0.0
    return (tp * tn - fp * fn) / np.sqrt(denom)


# --- segmentation metrics ---------------------------------------------------


def dsc(pred_mask, truth_mask):
    """Dice similarity 2|A&B| / (|A| + |B|)."""
    pred = np.asarray(pred_mask).astype(bool)
    truth = np.asarray(truth_mask).astype(bool)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {truth.shape}")
    total = pred.sum() + truth.sum()
    if total == 0:
        raise UndefinedMetricError("DSC undefined for two empty masks")
    return 2.0 * (pred & truth).sum() / total


def dsc_best_threshold(saliency, truth_mask):
    """DSC at the binarization threshold maximizing it, plus that threshold.

    Candidates are the unique saliency values (rule: value >= threshold).
    """
    sal = np.asarray(saliency, dtype=np.float64).ravel()
    truth = np.asarray(truth_mask).astype(bool).ravel()
    if sal.shape != truth.shape:
        raise ValueError(f"shape mismatch {sal.shape} vs {truth.shape}")
    n_pos = int(truth.sum())
    if n_pos == 0:
        raise UndefinedMetricError("DSC sweep needs a nonempty truth mask")
    order = np.argsort(-sal, kind="stable")
    sal_sorted = sal[order]
    tp = np.cumsum(truth[order])
    # last index of each run of equal values = full "value >= thr" set
    boundary = np.nonzero(np.diff(sal_sorted))[0]
    idx = np.append(boundary, len(sal_sorted) - 1)
    k = idx + 1
    dscs = 2.0 * tp[idx] / (k + n_pos)
    best = int(np.argmax(dscs))
    return float(dscs[best]), float(sal_sorted[idx[best]])


def pxap(saliency, truth_mask):
    """Pixel average precision: area under the precision-recall curve with
    saliency values as scores, integrating over unique-value thresholds."""
    sal = np.asarray(saliency, dtype=np.float64).ravel()
    truth = np.asarray(truth_mask).astype(bool).ravel()
    if sal.shape != truth.shape:
        raise ValueError(f"shape mismatch {sal.shape} vs {truth.shape}")
    n_pos = int(truth.sum())
    if n_pos == 0:
        raise UndefinedMetricError("PxAP needs a nonempty truth mask")
    order = np.argsort(-sal, kind="stable")
    sal_sorted = sal[order]
    tp = np.cumsum(truth[order])
    boundary = np.nonzero(np.diff(sal_sorted))[0]
    idx = np.append(boundary, len(sal_sorted) - 1)
    k = idx + 1
    precision = tp[idx] / k
    recall = tp[idx] / n_pos
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return float(((recall - prev_recall) * precision).sum())


def max_project(grid):
    """Depth-wise maximum of an (h, w, D) grid -> (h, w)."""
    return np.asarray(grid).max(axis=2)


def max_project_eval(saliency, truth_mask):
    """(DSC, PxAP) after max-projecting both 3D grids along depth."""
    sal2d = max_project(saliency)
    truth2d = max_project(np.asarray(truth_mask).astype(bool))
    best_dsc, _ = dsc_best_threshold(sal2d, truth2d)
    return best_dsc, pxap(sal2d, truth2d)


def upsample_saliency(sal2d, downsample, height, width):
    """Expand a saliency-grid plane to full resolution by block replication."""
    up = np.kron(np.asarray(sal2d), np.ones((downsample, downsample)))
    out = np.zeros((height, width), dtype=np.float64)
    h = min(height, up.shape[0])
    w = min(width, up.shape[1])
    out[:h, :w] = up[:h, :w]
    return out


# --- bootstrap --------------------------------------------------------------


def bootstrap_ci(values_fn, n_units, n_iter=1000, seed=0, alpha=0.05):
    """Percentile bootstrap over unit indices.

    `values_fn(idx)` maps a resampled index array to a metric value, or
    ``None`` to discard the iteration (the closest-sensitivity tolerance
    rule). Returns (lo, hi); raises if every iteration was discarded.
    """
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(n_iter):
        idx = rng.integers(0, n_units, size=n_units)
        try:
            value = values_fn(idx)
        except UndefinedMetricError:
            value = None
        if value is not None:
            samples.append(value)
    if not samples:
        raise UndefinedMetricError("all bootstrap iterations were discarded")
    lo = float(np.percentile(samples, 100 * alpha / 2))
    hi = float(np.percentile(samples, 100 * (1 - alpha / 2)))
    return lo, hi


SENSITIVITY_TOLERANCE = 0.025  # bootstrap discard rule around the 90% target


def _spec_mcc_sample(scores, labels, target=0.90):
    thr = threshold_at_sensitivity(scores, labels, target)
    if abs(sensitivity_at(scores, labels, thr) - target) > SENSITIVITY_TOLERANCE:
        return None
    return specificity_at(scores, labels, thr), mcc_at_threshold(scores, labels, thr)


# --- report -----------------------------------------------------------------

CLASS_NAMES = ("benign", "malignant")


def group_scores(scores, labels, group_ids):
    """Mean prediction over the views of each group, with the shared label."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    group_ids = np.asarray(group_ids)
    uniq = np.unique(group_ids)
    g_scores = np.array([scores[group_ids == g].mean() for g in uniq])
    g_labels = np.array([labels[group_ids == g][0] for g in uniq])
    return g_scores, g_labels, uniq


def classification_report(scores, labels, group_ids, n_iter=1000, seed=0):
    """Flat dict of point estimates and CI pairs for one class.

    `scores` are fused per-image predictions; `labels` the per-image binary
    labels; `group_ids` link the two views of each group.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(int)
    g_scores, g_labels, _ = group_scores(scores, labels, group_ids)
    report = {}

    report["image_auc"] = auc(scores, labels)
    report["image_auc_ci"] = bootstrap_ci(
        lambda idx: auc(scores[idx], labels[idx]), len(scores), n_iter, seed
    )
    report["group_auc"] = auc(g_scores, g_labels)
    report["group_auc_ci"] = bootstrap_ci(
        lambda idx: auc(g_scores[idx], g_labels[idx]), len(g_scores), n_iter, seed + 1
    )

    thr = threshold_at_sensitivity(g_scores, g_labels)
    report["threshold_90"] = thr
    report["specificity_at_90"] = specificity_at(g_scores, g_labels, thr)
    report["mcc_at_90"] = mcc_at_threshold(g_scores, g_labels, thr)

    def spec_sample(idx):
        pair = _spec_mcc_sample(g_scores[idx], g_labels[idx])
        return None if pair is None else pair[0]

    def mcc_sample(idx):
        pair = _spec_mcc_sample(g_scores[idx], g_labels[idx])
        return None if pair is None else pair[1]

    # when no resample reaches within the tolerance of the target
    # sensitivity the interval is reported as missing, not as an error
    try:
        report["specificity_at_90_ci"] = bootstrap_ci(
            spec_sample, len(g_scores), n_iter, seed + 2
        )
    except UndefinedMetricError:
        report["specificity_at_90_ci"] = None
    try:
        report["mcc_at_90_ci"] = bootstrap_ci(
            mcc_sample, len(g_scores), n_iter, seed + 3
        )
    except UndefinedMetricError:
        report["mcc_at_90_ci"] = None
    return report


def segmentation_report(saliency_maps, masks, n_iter=1000, seed=0):
    """Average DSC/PxAP (native and max-projected) over masked volumes.

    `saliency_maps` and `masks` are matched lists of (H, W, D) grids for one
    class, restricted to volumes where the class truth is nonempty.
    """
    if not masks:
        return {}
    per_image = []
    for sal, mask in zip(saliency_maps, masks):
        d, _ = dsc_best_threshold(sal, mask)
        p = pxap(sal, mask)
        dp, pp = max_project_eval(sal, mask)
        per_image.append((d, p, dp, pp))
    arr = np.array(per_image)
    keys = ("dsc", "pxap", "dsc_maxproj", "pxap_maxproj")
    report = {}
    for col, key in enumerate(keys):
        report[key] = float(arr[:, col].mean())
        report[f"{key}_ci"] = bootstrap_ci(
            lambda idx, c=col: float(arr[idx, c].mean()), len(arr), n_iter, seed + col
        )
    return report
