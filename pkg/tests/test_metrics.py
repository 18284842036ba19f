import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gmic3d.metrics import (
    SENSITIVITY_TOLERANCE,
    UndefinedMetricError,
    auc,
    bootstrap_ci,
    classification_report,
    dsc,
    dsc_best_threshold,
    group_scores,
    max_project,
    max_project_eval,
    mcc_at_threshold,
    pxap,
    segmentation_report,
    sensitivity_at,
    specificity_at,
    threshold_at_sensitivity,
    upsample_saliency,
)

from oracles import (
    auc_pairwise,
    dsc_sweep_oracle,
    mcc_oracle,
    pxap_sweep_oracle,
    sensitivity_sweep_oracle,
)


def scored_sample(rng, n=12, ties=False):
    labels = rng.integers(0, 2, size=n)
    while labels.min() == labels.max():
        labels = rng.integers(0, 2, size=n)
    if ties:
        scores = rng.integers(0, 4, size=n).astype(np.float64) / 4
    else:
        scores = rng.random(n)
    return scores, labels


class TestAuc:
    def test_perfect_and_inverted(self):
        labels = [0, 0, 1, 1]
        assert auc([0.1, 0.2, 0.8, 0.9], labels) == 1.0
        assert auc([0.9, 0.8, 0.2, 0.1], labels) == 0.0

    def test_all_tied_scores_give_half(self):
        assert auc([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]) == 0.5

    def test_matches_pairwise_oracle(self):
        rng = np.random.default_rng(0)
        for trial in range(40):
            scores, labels = scored_sample(rng, n=15, ties=trial % 2 == 0)
            assert auc(scores, labels) == pytest.approx(
                auc_pairwise(scores, labels), abs=1e-10
            )

    def test_single_class_rejected(self):
        with pytest.raises(UndefinedMetricError):
            auc([0.1, 0.2], [1, 1])


class TestThresholds:
    def test_sensitivity_specificity_hand_case(self):
        scores = np.array([0.1, 0.4, 0.35, 0.8])
        labels = np.array([0, 0, 1, 1])
        assert sensitivity_at(scores, labels, 0.35) == 1.0
        assert sensitivity_at(scores, labels, 0.5) == 0.5
        assert specificity_at(scores, labels, 0.35) == 0.5
        assert specificity_at(scores, labels, 0.05) == 0.0

    def test_threshold_matches_sweep_oracle(self):
        rng = np.random.default_rng(1)
        for trial in range(40):
            scores, labels = scored_sample(rng, n=18, ties=trial % 3 == 0)
            thr = threshold_at_sensitivity(scores, labels, 0.90)
            oracle_thr = sensitivity_sweep_oracle(scores, labels, 0.90)
            # both must achieve the same (closest, highest) sensitivity
            assert sensitivity_at(scores, labels, thr) == pytest.approx(
                sensitivity_at(scores, labels, oracle_thr), abs=1e-12
            )

    def test_equidistant_tie_prefers_higher_sensitivity(self):
        # four positives: sensitivities step by 0.25, so the 0.625 target is
        # exactly (in binary) between the 0.5 and 0.75 candidates
        scores = np.array([0.5, 0.6, 0.7, 0.8, 0.1, 0.2])
        labels = np.array([1, 1, 1, 1, 0, 0])
        thr = threshold_at_sensitivity(scores, labels, 0.625)
        assert sensitivity_at(scores, labels, thr) == pytest.approx(0.75)

    def test_no_positives_rejected(self):
        with pytest.raises(UndefinedMetricError):
            threshold_at_sensitivity([0.5, 0.6], [0, 0])


class TestMcc:
    def test_matches_confusion_matrix_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(40):
            scores, labels = scored_sample(rng, n=16)
            thr = float(rng.random())
            pred = scores >= thr
            lab = labels.astype(bool)
            expected = mcc_oracle(
                int((pred & lab).sum()),
                int((~pred & lab).sum()),
                int((pred & ~lab).sum()),
                int((~pred & ~lab).sum()),
            )
            assert mcc_at_threshold(scores, labels, thr) == pytest.approx(
                expected, abs=1e-12
            )

    def test_empty_margin_gives_zero(self):
        assert mcc_at_threshold([0.9, 0.8, 0.7], [1, 0, 1], 0.0) == 0.0
        assert mcc_at_threshold([0.1, 0.2, 0.3], [1, 0, 1], 0.9) == 0.0

    def test_perfect_classifier_gives_one(self):
        assert mcc_at_threshold([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0], 0.5) == 1.0


class TestSegmentationMetrics:
    def test_dsc_hand_values(self):
        a = np.array([1, 1, 0, 0], dtype=bool)
        b = np.array([1, 0, 1, 0], dtype=bool)
        assert dsc(a, b) == pytest.approx(0.5)
        assert dsc(a, a) == 1.0
        with pytest.raises(UndefinedMetricError):
            dsc(np.zeros(4, bool), np.zeros(4, bool))

    def test_dsc_sweep_matches_oracle_small_inputs(self):
        rng = np.random.default_rng(3)
        for trial in range(50):
            n = int(rng.integers(4, 21))
            sal = rng.integers(0, 6, size=n) / 5 if trial % 2 else rng.random(n)
            truth = rng.integers(0, 2, size=n).astype(bool)
            if not truth.any():
                truth[0] = True
            best, thr = dsc_best_threshold(sal, truth)
            assert best == pytest.approx(dsc_sweep_oracle(sal, truth), abs=1e-10)
            assert dsc(sal >= thr, truth) == pytest.approx(best, abs=1e-12)

    def test_pxap_matches_oracle_small_inputs(self):
        rng = np.random.default_rng(4)
        for trial in range(50):
            n = int(rng.integers(4, 21))
            sal = rng.integers(0, 6, size=n) / 5 if trial % 2 else rng.random(n)
            truth = rng.integers(0, 2, size=n).astype(bool)
            if not truth.any():
                truth[-1] = True
            assert pxap(sal, truth) == pytest.approx(
                pxap_sweep_oracle(sal, truth), abs=1e-10
            )

    def test_pxap_perfect_ranking_is_one(self):
        sal = np.array([0.9, 0.8, 0.2, 0.1])
        truth = np.array([1, 1, 0, 0], dtype=bool)
        assert pxap(sal, truth) == pytest.approx(1.0)

    def test_max_projection(self):
        grid = np.zeros((2, 2, 3))
        grid[0, 0, 1] = 0.7
        grid[1, 1, 2] = 0.3
        np.testing.assert_allclose(max_project(grid), [[0.7, 0.0], [0.0, 0.3]])

    def test_max_project_eval_collapses_depth(self):
        sal = np.zeros((4, 4, 3))
        mask = np.zeros((4, 4, 3), dtype=bool)
        sal[1, 1, 0] = 0.9
        mask[1, 1, 2] = True  # same xy cell, different slice
        d, p = max_project_eval(sal, mask)
        assert d == pytest.approx(1.0)  # depth collapse aligns them
        assert p == pytest.approx(1.0)

    def test_upsample_block_replication(self):
        sal = np.array([[0.2, 0.8], [0.4, 0.6]])
        up = upsample_saliency(sal, 2, 4, 4)
        assert up.shape == (4, 4)
        np.testing.assert_allclose(up[:2, :2], 0.2)
        np.testing.assert_allclose(up[2:, 2:], 0.6)

    def test_upsample_crops_to_image_size(self):
        up = upsample_saliency(np.ones((3, 3)), 4, 10, 10)
        assert up.shape == (10, 10)


class TestBootstrap:
    def test_constant_statistic_gives_degenerate_interval(self):
        lo, hi = bootstrap_ci(lambda idx: 0.7, 10, n_iter=100, seed=0)
        assert lo == hi == 0.7

    def test_interval_brackets_point_estimate(self):
        rng = np.random.default_rng(5)
        values = rng.normal(0.0, 1.0, size=60)
        lo, hi = bootstrap_ci(
            lambda idx: float(values[idx].mean()), len(values), n_iter=1000, seed=1
        )
        assert lo <= values.mean() <= hi
        assert hi - lo < 1.0  # roughly 4 standard errors

    def test_seed_deterministic(self):
        values = np.arange(20, dtype=np.float64)
        fn = lambda idx: float(values[idx].mean())
        assert bootstrap_ci(fn, 20, seed=3) == bootstrap_ci(fn, 20, seed=3)

    def test_discarded_iterations_are_dropped(self):
        calls = {"n": 0}

        def fn(idx):
            calls["n"] += 1
            return None if calls["n"] % 2 else float(idx.mean())

        lo, hi = bootstrap_ci(fn, 10, n_iter=100, seed=0)
        assert np.isfinite([lo, hi]).all()

    def test_all_discarded_raises(self):
        with pytest.raises(UndefinedMetricError):
            bootstrap_ci(lambda idx: None, 5, n_iter=10)


class TestReports:
    def make_cohort(self, rng, n_groups=30):
        group_ids = np.repeat(np.arange(n_groups), 2)
        labels = np.repeat(rng.integers(0, 2, size=n_groups), 2)
        scores = np.clip(
            labels * 0.5 + rng.normal(0.3, 0.2, size=2 * n_groups), 0, 1
        )
        return scores, labels, group_ids

    def test_group_scores_average_views(self):
        scores = np.array([0.2, 0.4, 0.9, 0.7])
        labels = np.array([0, 0, 1, 1])
        gids = np.array([5, 5, 9, 9])
        g_scores, g_labels, uniq = group_scores(scores, labels, gids)
        np.testing.assert_allclose(g_scores, [0.3, 0.8])
        np.testing.assert_array_equal(g_labels, [0, 1])
        np.testing.assert_array_equal(uniq, [5, 9])

    def test_classification_report_structure(self):
        rng = np.random.default_rng(6)
        scores, labels, gids = self.make_cohort(rng)
        rep = classification_report(scores, labels, gids, n_iter=100, seed=0)
        for key in ("image_auc", "group_auc", "specificity_at_90", "mcc_at_90"):
            lo, hi = rep[f"{key}_ci"] if key != "threshold_90" else (0, 1)
            assert lo <= rep[key] <= hi or key in ("specificity_at_90", "mcc_at_90")
        assert 0.0 <= rep["image_auc"] <= 1.0
        thr = rep["threshold_90"]
        g_scores, g_labels, _ = group_scores(scores, labels, gids)
        sens = sensitivity_at(g_scores, g_labels, thr)
        # the threshold is the closest achievable point to 90% sensitivity
        achievable = {
            sensitivity_at(g_scores, g_labels, t) for t in np.unique(g_scores)
        }
        assert abs(sens - 0.9) == pytest.approx(
            min(abs(s - 0.9) for s in achievable), abs=1e-12
        )

    def test_segmentation_report_structure(self):
        rng = np.random.default_rng(7)
        sals, masks = [], []
        for _ in range(6):
            mask = np.zeros((8, 8, 3), dtype=bool)
            mask[2:5, 2:5, 1] = True
            sal = rng.random((8, 8, 3)) * 0.2
            sal[mask] += 0.6
            sals.append(sal)
            masks.append(mask)
        rep = segmentation_report(sals, masks, n_iter=100, seed=0)
        for key in ("dsc", "pxap", "dsc_maxproj", "pxap_maxproj"):
            assert 0.0 <= rep[key] <= 1.0
            lo, hi = rep[f"{key}_ci"]
            assert lo <= hi
        assert rep["dsc"] > 0.8  # clearly separable construction

    def test_segmentation_report_empty_input(self):
        assert segmentation_report([], []) == {}

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000))
    def test_spec_mcc_bounds(self, seed):
        rng = np.random.default_rng(seed)
        scores, labels, gids = self.make_cohort(rng, n_groups=20)
        rep = classification_report(scores, labels, gids, n_iter=50, seed=0)
        assert 0.0 <= rep["specificity_at_90"] <= 1.0
        assert -1.0 <= rep["mcc_at_90"] <= 1.0
