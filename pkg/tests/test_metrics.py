import numpy as np
import pytest

from agrnet.metrics import (
    ConfusionMatrix,
    MetricsError,
    compute_metrics,
    format_report,
    helen_overall_f1,
)
from oracles import confusion_bruteforce


def test_update_diagonal():
    cm = ConfusionMatrix()
    cm.update(np.full(10, 3), np.full(10, 3))
    assert cm.counts[3, 3] == 10
    assert cm.counts.sum() == 10


def test_accumulation_commutes():
    rng = np.random.default_rng(0)
    a_pred, a_gt = rng.integers(0, 11, (2, 50))
    b_pred, b_gt = rng.integers(0, 11, (2, 70))
    ab = ConfusionMatrix().update(a_pred, a_gt).update(b_pred, b_gt)
    ba = ConfusionMatrix().update(b_pred, b_gt).update(a_pred, a_gt)
    assert np.array_equal(ab.counts, ba.counts)


def test_merge_associative():
    rng = np.random.default_rng(1)
    parts = [rng.integers(0, 11, (2, 40)) for _ in range(3)]
    one = ConfusionMatrix()
    for pred, gt in parts:
        one.update(pred, gt)
    merged = ConfusionMatrix()
    for pred, gt in parts:
        merged.merge(ConfusionMatrix().update(pred, gt))
    assert np.array_equal(one.counts, merged.counts)


def test_matches_bruteforce_counting():
    rng = np.random.default_rng(2)
    for _ in range(10):
        pred = rng.integers(0, 11, (3, 3))
        gt = rng.integers(0, 11, (3, 3))
        cm = ConfusionMatrix().update(pred, gt)
        assert np.array_equal(cm.counts, confusion_bruteforce(pred, gt, 11))


def test_out_of_range_label_rejected():
    with pytest.raises(MetricsError):
        ConfusionMatrix().update(np.array([11]), np.array([0]))


def test_perfect_predictions():
    rng = np.random.default_rng(3)
    gt = rng.integers(0, 11, 500)
    m = compute_metrics(ConfusionMatrix().update(gt, gt))
    assert m["pixel_accuracy"] == 1.0
    assert m["mean_f1"] == 1.0
    assert m["mean_iou"] == 1.0


def test_disjoint_class_scores_zero():
    cm = ConfusionMatrix()
    cm.update(np.full(10, 2), np.full(10, 3))  # class 3 always predicted as 2
    m = compute_metrics(cm)
    assert m["per_class"]["r_brow"]["f1"] == 0.0
    assert m["per_class"]["r_brow"]["iou"] == 0.0


def test_hand_built_two_class_f1():
    cm = ConfusionMatrix(num_classes=2)
    cm.counts[:] = [[8, 2], [1, 9]]
    m = compute_metrics(cm)
    # class 1: precision 9/11, recall 9/10 -> F1 = 0.857142...
    assert m["per_class"]["1"]["f1"] == pytest.approx(2 * (9/11) * (9/10) / ((9/11) + (9/10)))
    assert m["per_class"]["1"]["f1"] == pytest.approx(0.8571, abs=1e-4)


def test_absent_class_excluded_from_means():
    cm = ConfusionMatrix(num_classes=3)
    cm.counts[:] = [[5, 0, 0], [0, 5, 0], [0, 0, 0]]  # class 2 never occurs
    m = compute_metrics(cm)
    assert np.isnan(m["per_class"]["2"]["f1"])
    assert m["mean_f1"] == 1.0


def test_empty_matrix_errors():
    with pytest.raises(MetricsError):
        compute_metrics(ConfusionMatrix())


def test_f1_iou_identity_on_random_confusions():
    rng = np.random.default_rng(4)
    for _ in range(20):
        cm = ConfusionMatrix()
        cm.counts[:] = rng.integers(0, 50, (11, 11))
        m = compute_metrics(cm)
        for stats in m["per_class"].values():
            if np.isnan(stats["f1"]):
                continue
            assert stats["f1"] == pytest.approx(
                2 * stats["iou"] / (1 + stats["iou"]), abs=1e-9)


def test_overall_f1_perfect():
    gt = np.arange(11)
    cm = ConfusionMatrix().update(np.tile(gt, 10), np.tile(gt, 10))
    assert helen_overall_f1(cm) == 1.0


def test_intra_merge_confusion_vanishes():
    cm = ConfusionMatrix()
    cm.counts[2, 3] = 50   # left brow predicted as right brow only
    cm.counts[3, 2] = 50
    for k in (4, 5, 6, 7, 8, 9):
        cm.counts[k, k] = 10
    assert helen_overall_f1(cm) == 1.0


def test_overall_f1_hand_computed():
    cm = ConfusionMatrix()
    cm.counts[2, 2] = 30; cm.counts[3, 3] = 30; cm.counts[2, 0] = 20  # brows
    cm.counts[4, 4] = 40; cm.counts[5, 5] = 40; cm.counts[0, 4] = 20  # eyes
    cm.counts[6, 6] = 50                                              # nose
    cm.counts[7, 8] = 25; cm.counts[8, 9] = 25; cm.counts[9, 7] = 25  # mouth
    cm.counts[0, 0] = 100
    # brows: tp=60 fn=20 fp=0 -> 120/140; eyes: tp=80 fp=20 -> 160/180
    # nose: 1; mouth: all intra-merge -> 1
    expected = np.mean([120/140, 160/180, 1.0, 1.0])
    assert helen_overall_f1(cm) == pytest.approx(expected, abs=1e-12)


def test_overall_f1_needs_11_classes():
    with pytest.raises(MetricsError):
        helen_overall_f1(ConfusionMatrix(num_classes=4))


def test_report_row_count():
    gt = np.arange(11)
    cm = ConfusionMatrix().update(gt, gt)
    m = compute_metrics(cm)
    report = format_report(m, helen_overall_f1(cm))
    lines = report.strip().split("\n")
    # header + 11 classes + mean + pixel acc + mean class acc + overall
    assert len(lines) == 1 + 11 + 4
