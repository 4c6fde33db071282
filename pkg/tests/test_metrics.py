"""WA/UA hand counts, confusion matrices, fold aggregation."""

import numpy as np
import pytest

from serkit.metrics import (
    ConfusionMatrix,
    EvalReport,
    FoldResult,
    aggregate,
    confusion,
    ua_from_confusion,
    unweighted_accuracy,
    wa_from_confusion,
    weighted_accuracy,
)
from serkit.errors import ConfigError, LabelError, ShapeError

RNG = np.random.default_rng(555)


def test_wa_hand_count():
    assert weighted_accuracy(["A", "A", "B", "B"], ["A", "A", "A", "B"]) == pytest.approx(0.75)


def test_wa_perfect():
    assert weighted_accuracy(list("ABAB"), list("ABAB")) == 1.0


def test_wa_length_mismatch():
    with pytest.raises(ShapeError):
        weighted_accuracy(["A"], ["A", "B"])
    with pytest.raises(ShapeError):
        weighted_accuracy([], [])


def test_ua_hand_count():
    assert unweighted_accuracy(["A", "A", "B", "B"], ["A", "A", "A", "B"]) == pytest.approx((2 / 3 + 1) / 2)


def test_ua_single_class():
    assert unweighted_accuracy(["A", "B", "A"], ["A", "A", "A"]) == pytest.approx(2 / 3)


def test_wa_equals_ua_balanced():
    for _ in range(50):
        labels = ["A"] * 20 + ["B"] * 20
        preds = [lb if RNG.random() < 0.7 else ("B" if lb == "A" else "A") for lb in labels]
        # per-class error counts must be equal for exact equality; force that
        preds = ["A"] * 15 + ["B"] * 5 + ["B"] * 15 + ["A"] * 5
        assert abs(weighted_accuracy(preds, labels) - unweighted_accuracy(preds, labels)) < 1e-9


def test_confusion_identity():
    cm = confusion(list("AABB"), list("AABB"), ["A", "B"])
    np.testing.assert_array_equal(cm.counts, [[2, 0], [0, 2]])
    np.testing.assert_allclose(np.diag(cm.row_percent), 100.0)


def test_confusion_hand_example():
    cm = confusion(["A", "B", "B"], ["A", "A", "B"], ["A", "B"])
    np.testing.assert_allclose(cm.row_percent, [[50.0, 50.0], [0.0, 100.0]])


def test_confusion_rows_sum_to_100():
    labels = [str(x) for x in RNG.integers(0, 4, size=200)]
    preds = [str(x) for x in RNG.integers(0, 4, size=200)]
    order = ["0", "1", "2", "3"]
    cm = confusion(preds, labels, order)
    sums = cm.row_percent.sum(axis=1)
    present = cm.counts.sum(axis=1) > 0
    np.testing.assert_allclose(sums[present], 100.0, atol=0.01)


def test_confusion_zero_row_flagged():
    cm = confusion(["A", "A"], ["A", "A"], ["A", "B"])
    assert cm.zero_rows == ("B",)
    np.testing.assert_array_equal(cm.row_percent[1], [0.0, 0.0])


def test_confusion_unknown_label():
    with pytest.raises(LabelError):
        confusion(["A"], ["Z"], ["A", "B"])


def test_metric_cross_checks():
    for _ in range(30):
        order = ["a", "b", "c"]
        labels = [order[i] for i in RNG.integers(0, 3, size=60)]
        preds = [order[i] for i in RNG.integers(0, 3, size=60)]
        cm = confusion(preds, labels, order)
        assert weighted_accuracy(preds, labels) == pytest.approx(wa_from_confusion(cm), abs=1e-12)
        assert unweighted_accuracy(preds, labels) == pytest.approx(ua_from_confusion(cm), abs=1e-12)


def test_relabeling_invariance():
    mapping = {"A": "x", "B": "y", "C": "z"}
    labels = [lb for lb in RNG.choice(["A", "B", "C"], size=90)]
    preds = [lb for lb in RNG.choice(["A", "B", "C"], size=90)]
    wa1 = weighted_accuracy(preds, labels)
    ua1 = unweighted_accuracy(preds, labels)
    wa2 = weighted_accuracy([mapping[p] for p in preds], [mapping[t] for t in labels])
    ua2 = unweighted_accuracy([mapping[p] for p in preds], [mapping[t] for t in labels])
    assert wa1 == wa2 and ua1 == ua2
    cm1 = confusion(preds, labels, ["A", "B", "C"])
    cm2 = confusion([mapping[p] for p in preds], [mapping[t] for t in labels], ["x", "y", "z"])
    np.testing.assert_array_equal(cm1.counts, cm2.counts)


def fold(wa, ua):
    cm = confusion(["A", "B"], ["A", "B"], ["A", "B"])
    return FoldResult(wa=wa, ua=ua, matrix=cm)


def test_aggregate_hand_example():
    report = aggregate([fold(0.90, 0.90), fold(0.92, 0.92), fold(0.94, 0.94)], dataset="d")
    assert report.wa_mean == pytest.approx(0.92)
    assert report.wa_std == pytest.approx(0.02)
    assert "92.00" in report.summary_line() and "2.00" in report.summary_line()


def test_aggregate_single_fold_omits_std():
    report = aggregate([fold(0.5, 0.5)])
    assert report.wa_std is None and report.ua_std is None
    assert "±" not in report.summary_line()


def test_aggregate_equal_folds_zero_std():
    report = aggregate([fold(0.8, 0.7)] * 3)
    assert report.wa_std == pytest.approx(0.0, abs=1e-12)
    assert "± 0.00" in report.summary_line()


def test_aggregate_heterogeneous_labels_rejected():
    other = FoldResult(wa=1.0, ua=1.0, matrix=confusion(["x"], ["x"], ["x", "y"]))
    with pytest.raises(ConfigError):
        aggregate([fold(1.0, 1.0), other])


def test_report_json_round_trip():
    report = aggregate(
        [fold(0.91, 0.90), fold(0.95, 0.96)],
        dataset="emodb",
        checkpoint_id="abc123",
        split_mode="kfold",
        seed=7,
        config_hash="deadbeef",
        extra={"train_config": {"seed": 7}},
    )
    again = EvalReport.from_json(report.to_json())
    assert again == report
    assert again.to_json() == report.to_json()


def test_render_contains_matrix():
    report = aggregate([fold(1.0, 1.0)], dataset="d")
    text = report.render()
    assert "fold 0" in text and "100.00" in text
