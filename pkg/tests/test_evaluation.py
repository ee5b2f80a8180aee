import numpy as np
import pytest

from mmmt.errors import InputError
from mmmt.evaluation import (MetricsReport, aggregate, binarize_task_c,
                             evaluate_predictions, format_report,
                             reference_tables, weighted_f1)
from mmmt.rng import RngState


def brute_force_weighted_f1(preds, golds, num_classes):
    """Independent oracle: per-class precision/recall from scratch counters."""
    n = len(golds)
    score = 0.0
    for c in range(num_classes):
        tp = fp = fn = 0
        for p, g in zip(preds, golds):
            if p == c and g == c:
                tp += 1
            elif p == c and g != c:
                fp += 1
            elif p != c and g == c:
                fn += 1
        support = tp + fn
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / support if support > 0 else 0.0
        if precision + recall > 0:
            f1 = 2 * precision * recall / (precision + recall)
        else:
            f1 = 0.0
        score += (support / n) * f1
    return min(score, 1.0)


class TestWeightedF1:
    def test_perfect(self):
        assert weighted_f1([0, 1, 2, 1], [0, 1, 2, 1], 3) == 1.0

    def test_hand_confusion_matrix(self):
        # class0: P=1, R=1/2; class1: P=1/2, R=1 -> both F1 = 2/3
        assert weighted_f1([0, 1, 1], [0, 0, 1], 2) == 2 / 3

    def test_zero_division_convention(self):
        # class 2 never predicted nor present: contributes 0 with weight 0
        assert weighted_f1([0, 0], [0, 1], 3) == pytest.approx(0.5 * (2 / 3))

    def test_matches_brute_force_on_200_random_instances(self):
        rng = RngState(123)
        for _ in range(200):
            k = 2 + rng.next_below(4)
            n = 1 + rng.next_below(60)
            preds = [rng.next_below(k) for _ in range(n)]
            golds = [rng.next_below(k) for _ in range(n)]
            assert weighted_f1(preds, golds, k) == \
                brute_force_weighted_f1(preds, golds, k)

    def test_permutation_invariance(self):
        rng = RngState(9)
        preds = np.array([rng.next_below(3) for _ in range(40)])
        golds = np.array([rng.next_below(3) for _ in range(40)])
        base = weighted_f1(preds, golds, 3)
        perm = np.arange(40)
        RngState(4).shuffle(perm)
        assert weighted_f1(preds[perm], golds[perm], 3) == base

    def test_relabeling_invariance(self):
        rng = RngState(10)
        preds = np.array([rng.next_below(3) for _ in range(50)])
        golds = np.array([rng.next_below(3) for _ in range(50)])
        relabel = np.array([2, 0, 1])
        assert weighted_f1(relabel[preds], relabel[golds], 3) == \
            pytest.approx(weighted_f1(preds, golds, 3), abs=1e-15)

    def test_input_errors(self):
        with pytest.raises(InputError):
            weighted_f1([0, 1], [0], 2)
        with pytest.raises(InputError):
            weighted_f1([0, 5], [0, 1], 2)
        with pytest.raises(InputError):
            weighted_f1([], [], 2)


class TestBinarize:
    def test_mapping_rule(self):
        assert binarize_task_c([0, 1, 2, 3]).tolist() == [0, 1, 1, 1]

    def test_all_zeros(self):
        assert binarize_task_c([0, 0, 0]).tolist() == [0, 0, 0]

    def test_idempotent(self):
        once = binarize_task_c([0, 1, 2, 3])
        assert np.array_equal(binarize_task_c(once), once)

    def test_out_of_range(self):
        with pytest.raises(InputError):
            binarize_task_c([0, 4])


class TestAggregate:
    def test_all_ones(self):
        r = aggregate(1.0, {h: 1.0 for h in ("humour", "sarcasm", "offensive",
                                             "motivation")},
                      {h: 1.0 for h in ("humour", "sarcasm", "offensive",
                                        "motivation")})
        assert r.task_b == 1.0 and r.task_a == 1.0 and r.mean == 1.0

    def test_published_per_emotion_scores_reproduce_task_b(self):
        binary = {"humour": 0.8111, "sarcasm": 0.8191, "offensive": 0.485,
                  "motivation": 0.98}
        r = aggregate(0.5318, binary, {h: 0.0 for h in binary})
        assert abs(r.task_b - 0.7738) < 0.0005

    def test_leaderboard_blue_mean(self):
        # mean of (0.5318, 0.8059, 0.5443) rounds to the published 0.6273
        vals = (0.5318, 0.8059, 0.5443)
        mean = sum(vals) / 3
        assert abs(mean - 0.6273) < 5e-5

    def test_missing_subtask_marks_na(self):
        binary = {"humour": 0.5, "sarcasm": None, "offensive": 0.5,
                  "motivation": 0.5}
        r = aggregate(0.4, binary, dict(binary))
        assert r.task_b is None and r.task_c is None and r.mean is None
        assert r.task_a == 0.4
        assert "N/A" in format_report(r)

    def test_out_of_range_score_rejected(self):
        with pytest.raises(InputError):
            aggregate(1.5, {h: 0.5 for h in ("humour", "sarcasm", "offensive",
                                             "motivation")},
                      {h: 0.5 for h in ("humour", "sarcasm", "offensive",
                                        "motivation")})

    def test_deterministic_and_order_independent(self):
        binary = {"motivation": 0.9, "humour": 0.7, "offensive": 0.6,
                  "sarcasm": 0.8}
        multi = {"offensive": 0.3, "humour": 0.4, "motivation": 0.9,
                 "sarcasm": 0.2}
        r1 = aggregate(0.5, binary, multi)
        r2 = aggregate(0.5, dict(reversed(list(binary.items()))),
                       dict(reversed(list(multi.items()))))
        assert r1 == r2


class TestEvaluatePredictions:
    def test_motivation_binary_equals_multiclass(self):
        preds = {"sentiment": np.array([0, 1]), "humour": np.array([0, 2]),
                 "sarcasm": np.array([1, 1]), "offensive": np.array([0, 0]),
                 "motivation": np.array([1, 0])}
        golds = {k: v.copy() for k, v in preds.items()}
        r = evaluate_predictions(preds, golds)
        assert r.per_head_binary["motivation"] == r.per_head_multiclass["motivation"]
        assert r.mean == 1.0

    def test_absent_gold_labels_excluded(self):
        preds = {"sentiment": np.array([0, 1]), "humour": np.array([1, 1]),
                 "sarcasm": np.array([0, 0]), "offensive": np.array([0, 0]),
                 "motivation": np.array([0, 1])}
        golds = {k: v.copy() for k, v in preds.items()}
        golds["sentiment"] = np.array([-1, 1])   # first record unlabeled
        r = evaluate_predictions(preds, golds)
        assert r.task_a == 1.0

    def test_wholly_unlabeled_head_is_na(self):
        preds = {"sentiment": np.array([0]), "humour": np.array([1]),
                 "sarcasm": np.array([0]), "offensive": np.array([0]),
                 "motivation": np.array([0])}
        golds = {k: v.copy() for k, v in preds.items()}
        golds["humour"] = np.array([-1])
        r = evaluate_predictions(preds, golds)
        assert r.task_b is None and r.task_c is None


class TestReferenceTables:
    def test_blue_task_a(self):
        table7 = reference_tables()["table7"]
        blue = next(r for r in table7 if r["team"] == "BLUE")
        assert blue["task_a"] == 0.5318

    def test_baseline_task_b(self):
        table7 = reference_tables()["table7"]
        baseline = next(r for r in table7 if r["team"] == "BASELINE")
        assert baseline["task_b"] == 0.7358

    def test_ablation_submission_row(self):
        table5 = reference_tables()["table5"]
        sub = next(r for r in table5
                   if r["modalities"] == ("image", "clip", "text"))
        assert sub["task_a"] == 0.5178

    def test_na_row_present(self):
        table7 = reference_tables()["table7"]
        lf = next(r for r in table7 if r["team"] == "Little Flower")
        assert lf["task_c"] is None and lf["mean"] is None

    def test_table2_mmmt_column_consistent_with_table3(self):
        table2 = reference_tables()["table2"]
        b_scores = [r["mmmt"] for r in table2 if r["task"] in ("B", "BC")]
        assert abs(sum(b_scores) / 4 - 0.7738) < 0.0005
