import numpy as np
import pytest

from oodr.errors import InputError
from oodr.evaluation import (
    IGNORE,
    RetrievedInstance,
    clear_mot,
    component_f1,
    component_stats,
    f1_bar,
    fpr_at_95_tpr,
    pixel_auprc,
    query_pr_curve,
    retrieval_pr,
)
from oodr.scoring import extract_components

from oracles import ap_sweep, fpr95_sweep


class TestPixelAuprc:
    def test_hand_example(self):
        # thresholds 0.9, 0.8, 0.1 -> AP = 0.5*1 + 0.5*(2/3)
        got = pixel_auprc([0.9, 0.8, 0.1], [1, 0, 1])
        assert got == pytest.approx(100 * (0.5 + 0.5 * 2 / 3))

    def test_perfect_separation(self):
        assert pixel_auprc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 100.0

    def test_matches_sweep_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            n = int(rng.integers(20, 200))
            scores = rng.choice(rng.random(n // 2), size=n)  # force ties
            labels = (rng.random(n) < 0.4).astype(int)
            if labels.sum() in (0, n):
                continue
            assert pixel_auprc(scores, labels) == pytest.approx(
                ap_sweep(scores, labels), abs=1e-9
            )

    def test_ignore_pixels_excluded(self):
        scores = [0.9, 0.5, 0.8, 0.1]
        labels = [1, IGNORE, 0, 0]
        assert pixel_auprc(scores, labels) == pixel_auprc([0.9, 0.8, 0.1], [1, 0, 0])

    def test_single_class_rejected(self):
        with pytest.raises(InputError):
            pixel_auprc([0.5, 0.6], [1, 1])

    def test_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(1)
        scores = rng.random(100)
        labels = (rng.random(100) < 0.3).astype(int)
        transformed = np.exp(3 * scores) - 1
        assert pixel_auprc(scores, labels) == pytest.approx(
            pixel_auprc(transformed, labels), abs=1e-9
        )


class TestFpr95:
    def test_hand_example(self):
        # positives {0.9, 0.8}, negatives {0.85, 0.1} -> threshold 0.8 -> FPR 1/2
        assert fpr_at_95_tpr([0.9, 0.8, 0.85, 0.1], [1, 1, 0, 0]) == pytest.approx(50.0)

    def test_perfect_separation(self):
        assert fpr_at_95_tpr([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 0.0

    def test_all_scores_equal(self):
        assert fpr_at_95_tpr([0.5] * 10, [1, 1, 1, 1, 1, 0, 0, 0, 0, 0]) == 100.0

    def test_matches_sweep_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(30):
            n = int(rng.integers(30, 300))
            scores = rng.choice(rng.random(n // 3), size=n)
            labels = (rng.random(n) < 0.5).astype(int)
            if labels.sum() in (0, n):
                continue
            assert fpr_at_95_tpr(scores, labels) == pytest.approx(
                fpr95_sweep(scores, labels), abs=1e-9
            )

    def test_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(3)
        scores = rng.random(80)
        labels = (rng.random(80) < 0.4).astype(int)
        assert fpr_at_95_tpr(scores, labels) == pytest.approx(
            fpr_at_95_tpr(scores**3 + 2, labels), abs=1e-9
        )


def _segs(mask, frame=0):
    mask = np.asarray(mask, dtype=bool)
    return extract_components(mask, np.zeros(mask.shape), frame)


class TestComponentF1:
    def test_identical_is_perfect(self):
        mask = np.zeros((10, 10), dtype=bool)
        mask[2:5, 2:5] = True
        mask[7:9, 7:9] = True
        roi = np.ones((10, 10), dtype=bool)
        assert component_f1(_segs(mask), _segs(mask), roi).value == 100.0

    def test_no_predictions_is_zero(self):
        gt = np.zeros((8, 8), dtype=bool)
        gt[1:3, 1:3] = True
        score = component_f1([], _segs(gt), np.ones((8, 8), bool))
        assert score.value == 0.0
        assert not score.vacuous

    def test_half_overlap_hand_value(self):
        # GT 10 pixels, prediction covers 5 of them and nothing else:
        # sIoU = 0.5, PPV = 1; F1 = 1 for tau <= 0.5, else 0 -> mean 6/11
        gt = np.zeros((6, 12), dtype=bool)
        gt[2, 1:11] = True
        pred = np.zeros((6, 12), dtype=bool)
        pred[2, 1:6] = True
        score = component_f1(_segs(pred), _segs(gt), np.ones((6, 12), bool))
        assert score.value == pytest.approx(600 / 11)

    def test_gt_against_itself_is_100_regardless_of_roi(self):
        rng = np.random.default_rng(4)
        mask = np.zeros((16, 16), dtype=bool)
        mask[2:6, 2:6] = True
        mask[10:13, 9:14] = True
        for _ in range(10):
            roi = rng.random((16, 16)) < rng.random()
            segs = _segs(mask)
            assert component_f1(segs, segs, roi).value == 100.0

    def test_both_empty_is_vacuous(self):
        score = component_f1([], [], np.ones((4, 4), bool))
        assert score.value == 100.0
        assert score.vacuous

    def test_adjusted_siou_ignores_other_gt_components(self):
        # one prediction covering two adjacent GT components: the part on
        # the other component must not count against the union
        gt = np.zeros((5, 10), dtype=bool)
        gt[2, 0:4] = True
        gt[2, 6:10] = True
        pred = np.zeros((5, 10), dtype=bool)
        pred[2, 0:10] = True  # bridges both plus the 2-pixel gap
        stats = component_stats(_segs(pred), _segs(gt), np.ones((5, 10), bool))
        # union \ other = own 4 + gap 2 -> sIoU = 4/6 each
        assert stats.siou == pytest.approx([4 / 6, 4 / 6])
        assert stats.ppv == pytest.approx([8 / 10])

    def test_false_positive_component_costs_precision(self):
        gt = np.zeros((8, 8), dtype=bool)
        gt[1:3, 1:3] = True
        pred = gt.copy()
        pred[5:7, 5:7] = True  # an extra component on background
        score = component_f1(_segs(pred), _segs(gt), np.ones((8, 8), bool))
        # TP=1, FN=0, FP=1 at every threshold: F1 = 2/(2+0+1)
        assert score.value == pytest.approx(100 * 2 / 3)

    def test_roi_restriction_drops_outside_segments(self):
        gt = np.zeros((8, 8), dtype=bool)
        gt[1:3, 1:3] = True
        pred = gt.copy()
        pred[5:7, 5:7] = True
        roi = np.zeros((8, 8), dtype=bool)
        roi[:4, :4] = True  # the FP is outside the ROI
        assert component_f1(_segs(pred), _segs(gt), roi).value == 100.0


class TestClearMot:
    def test_perfect_tracking(self):
        gt = {f: {1: (10.0, 10.0 + f)} for f in range(5)}
        score = clear_mot(gt, gt, match_radius=5.0)
        assert score.mota == 1.0
        assert score.motp == 0.0
        assert score.id_switches == 0

    def test_one_miss_gives_three_quarters(self):
        gt = {f: {1: (10.0, float(f))} for f in range(4)}
        pred = {f: {7: (10.0, float(f))} for f in range(4) if f != 2}
        score = clear_mot(pred, gt, match_radius=2.0)
        assert score.mota == pytest.approx(0.75)
        assert score.fn == 1 and score.fp == 0 and score.id_switches == 0

    def test_identity_swap_hand_value(self):
        gt = {f: {1: (10.0, float(f))} for f in range(10)}
        pred = {}
        for f in range(10):
            pid = "a" if f < 5 else "b"
            pred[f] = {pid: (10.0, float(f))}
        score = clear_mot(pred, gt, match_radius=2.0)
        assert score.id_switches == 1
        assert score.mota == pytest.approx(0.9)

    def test_negative_mota_under_fp_flood(self):
        gt = {f: {1: (10.0, float(f))} for f in range(10)}
        pred = {}
        for f in range(10):
            objs = {1: (10.0, float(f))}
            for j in range(3):  # 3 false positives every frame
                objs[f"fp{j}"] = (40.0 + 10 * j, 40.0)
            pred[f] = objs
        score = clear_mot(pred, gt, match_radius=2.0)
        assert score.mota == pytest.approx(1.0 - 30 / 10)  # = -2.0
        assert score.fp == 30

    def test_motp_is_mean_matched_distance(self):
        gt = {0: {1: (0.0, 0.0)}, 1: {1: (0.0, 0.0)}}
        pred = {0: {1: (0.0, 3.0)}, 1: {1: (0.0, 1.0)}}
        score = clear_mot(pred, gt, match_radius=5.0)
        assert score.motp == pytest.approx(2.0)

    def test_correspondence_persistence_beats_greedy_distance(self):
        # at frame 1, pred 'a' is slightly farther than 'b', but 'a' held
        # the correspondence at frame 0 and is still within the radius
        gt = {0: {1: (0.0, 0.0)}, 1: {1: (0.0, 0.0)}}
        pred = {
            0: {"a": (0.0, 0.0), "b": (0.0, 3.0)},
            1: {"a": (0.0, 1.0), "b": (0.0, 0.5)},
        }
        score = clear_mot(pred, gt, match_radius=5.0)
        assert score.id_switches == 0
        assert score.fp == 2  # the unmatched hypothesis each frame

    def test_empty_gt_rejected(self):
        with pytest.raises(InputError):
            clear_mot({}, {}, 1.0)


class TestRetrievalPr:
    def test_perfect_retrieval(self):
        instances = [RetrievedInstance(0.9, ("v", 0, 1), "dog"),
                     RetrievedInstance(0.8, ("v", 1, 1), "dog")]
        curve = query_pr_curve(instances, "dog", gt_total=2)
        assert curve.auprc == 100.0
        assert curve.precision[0] == 1.0 and curve.recall[0] == 0.0  # empty endpoint

    def test_empty_retrieval_endpoint_always_present(self):
        curve = query_pr_curve([], "dog", gt_total=3)
        assert curve.recall == [0.0]
        assert curve.auprc == 0.0

    def test_undefined_recall_flag(self):
        curve = query_pr_curve([RetrievedInstance(0.5, None, None)], "cat", gt_total=0)
        assert curve.undefined_recall

    def test_interleaved_false_positives_lower_ap(self):
        clean = [
            RetrievedInstance(0.9, ("v", 0, 1), "dog"),
            RetrievedInstance(0.5, ("v", 1, 1), "dog"),
        ]
        polluted = clean + [RetrievedInstance(0.7, None, None)]
        ap_clean = query_pr_curve(clean, "dog", 2).auprc
        ap_polluted = query_pr_curve(polluted, "dog", 2).auprc
        assert ap_polluted < ap_clean
        # below-all false positives change nothing (step-wise AP)
        harmless = clean + [RetrievedInstance(0.1, None, None)]
        assert query_pr_curve(harmless, "dog", 2).auprc == ap_clean

    def test_matches_exhaustive_pair_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            n = int(rng.integers(5, 60))
            instances = []
            keys = []
            for i in range(n):
                matched = rng.random() < 0.5
                key = ("v", i, 1) if matched else None
                cls = "dog" if matched else ("ball" if rng.random() < 0.5 else None)
                score = float(rng.choice([0.1, 0.3, 0.5, 0.7, 0.9]))
                instances.append(RetrievedInstance(score, key, cls))
                if matched:
                    keys.append(key)
            gt_total = len(keys) + int(rng.integers(0, 4))
            if not keys:
                continue
            curve = query_pr_curve(instances, "dog", gt_total)
            # oracle: explicit sweep over every attained tau
            taus = sorted({r.score for r in instances}, reverse=True)
            ap = 0.0
            prev_recall = 0.0
            for tau in taus:
                retrieved = [r for r in instances if r.score >= tau]
                tp = [r for r in retrieved if r.instance_class == "dog" and r.instance_key]
                precision = len(tp) / len(retrieved)
                recall = len({r.instance_key for r in tp}) / gt_total
                ap += (recall - prev_recall) * precision
                prev_recall = recall
            assert curve.auprc == pytest.approx(100 * ap, abs=1e-9)

    def test_mean_and_pooled_reports(self):
        per_query = {
            "dog": [RetrievedInstance(0.9, ("v", 0, 1), "dog")],
            "ball": [RetrievedInstance(0.8, ("v", 0, 2), "ball"),
                     RetrievedInstance(0.7, None, None)],
        }
        report = retrieval_pr(per_query, {"dog": 1, "ball": 1})
        assert report.curves["dog"].auprc == 100.0
        assert report.curves["ball"].auprc == 100.0
        assert report.mean_auprc == 100.0
        assert report.pooled_auprc == 100.0

    def test_query_class_absent_from_gt_flagged(self):
        report = retrieval_pr({"cat": [RetrievedInstance(0.5, None, None)]}, {})
        assert report.curves["cat"].undefined_recall


class TestF1BarVacuous:
    def test_stats_aggregation(self):
        a = component_stats([], [], np.ones((2, 2), bool))
        assert f1_bar(a).vacuous
