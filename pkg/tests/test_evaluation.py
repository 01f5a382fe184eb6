
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sliceloc.errors import EmptyInput, FormatError
from sliceloc.evaluation import (
    RULE_REFERENCE,
    EvalRecord,
    confusion_and_rates,
    localization_error,
    lower_median,
    metrics,
    metrics_by_split,
    orientation_error,
    rates_from_counts,
    report_row,
)
from sliceloc.geometry import CameraPose

GT = CameraPose(0.0, 0.0, 0.0)


def rec(i, err_m=0.0, ori=0.0, lg=-5.0, valid=None, split="all", ref=None):
    valid = lg < 0 if valid is None else valid
    pose = CameraPose(err_m, 0.0, ori)
    return EvalRecord(str(i), valid, lg, pose if valid else None, pose, GT, ref, 1.0, split)


def test_errors():
    assert localization_error(GT, GT, 0.11) == 0.0
    assert localization_error(CameraPose(100, 0, 0), GT, 0.11) == pytest.approx(11.0)
    assert localization_error(CameraPose(3, 4, 0), GT, 1.0) == 5.0
    assert orientation_error(CameraPose(0, 0, 359), CameraPose(0, 0, 1)) == pytest.approx(2.0)
    assert orientation_error(CameraPose(0, 0, 0), CameraPose(0, 0, 180)) == 180.0
    assert orientation_error(CameraPose(0, 0, 37), CameraPose(0, 0, 37)) == 0.0


def test_hand_confusion():
    c = rates_from_counts(tp=2, fp=1, tn=3, fn=1)
    assert c.potn == c.rotn == c.f1 == 0.75
    assert c.acc == pytest.approx(5 / 7, abs=1e-12)
    assert c.total == 7


def test_confusion_edge_cases():
    c = rates_from_counts(0, 0, 4, 0)
    assert c.rotn == 1.0 and c.acc == 1.0
    c = rates_from_counts(3, 0, 0, 2)
    assert c.rotn is None and c.f1 is None and c.potn == 0.0
    with pytest.raises(EmptyInput):
        rates_from_counts(0, 0, 0, 0)
    with pytest.raises(EmptyInput):
        confusion_and_rates([])


def test_confusion_from_records():
    # errors > 10 m are negatives; lg >= tau predicts negative
    recs = [rec(0, 1, lg=-3), rec(1, 2, lg=-1), rec(2, 50, lg=-2),  # TP, TP, FP
            rec(3, 40, lg=2), rec(4, 30, lg=0.0), rec(5, 20, lg=1),  # TN x3 (tau boundary is negative)
            rec(6, 1, lg=3)]                                         # FN
    c = confusion_and_rates(recs, tau=0.0)
    assert (c.tp, c.fp, c.tn, c.fn) == (2, 1, 3, 1)
    assert c.potn == c.rotn == c.f1 == 0.75 and c.acc == pytest.approx(5 / 7)


def test_reference_rule():
    recs = [rec(0, lg=-1, ref=True), rec(1, lg=1, ref=False), rec(2, lg=-1, ref=False)]
    c = confusion_and_rates(recs, negative_rule=RULE_REFERENCE)
    assert (c.tp, c.fp, c.tn, c.fn) == (1, 1, 1, 0)
    with pytest.raises(FormatError):
        confusion_and_rates([rec(0)], negative_rule=RULE_REFERENCE)


def test_metrics_single():
    m = metrics([rec(0, 2.0, 1.5)])
    assert m.loc_mean_m == m.loc_median_m == 2.0
    assert m.ori_mean_deg == m.ori_median_deg == 1.5
    assert m.loc_below[3.0] == 100.0 and m.loc_below[1.0] == 0.0


def test_metrics_three():
    m = metrics([rec(0, 1.0), rec(1, 3.0), rec(2, 100.0)])
    assert m.loc_mean_m == pytest.approx(34.6667, abs=1e-4)
    assert m.loc_median_m == 3.0
    assert m.loc_below[10.0] == pytest.approx(200 / 3)


def test_metrics_ten_record_buckets():
    errs = [0.5, 0.9, 1.0, 2.5, 3.0, 4.9, 7.9, 8.0, 9.99, 25.0]
    oris = [0.1, 1.0, 2.0, 3.5, 4.0, 5.0, 6.0, 8.5, 9.0, 30.0]
    m = metrics([rec(i, e, o) for i, (e, o) in enumerate(zip(errs, oris))])
    # strict "<" buckets: 1 m -> {0.5, 0.9}; 3 m -> +{1.0, 2.5}; 5 m -> +{3.0, 4.9}; ...
    assert m.loc_below == {1.0: 20.0, 3.0: 40.0, 5.0: 60.0, 8.0: 70.0, 10.0: 90.0}
    assert m.ori_below == {1.0: 10.0, 3.0: 30.0, 5.0: 50.0, 8.0: 70.0, 10.0: 90.0}
    assert m.loc_median_m == 3.0  # lower middle of 10
    assert m.ori_median_deg == 4.0


def test_pos_and_valid_only_statistics():
    recs = [rec(i, 1.0) for i in range(78)] + [rec(100 + i, 500.0, lg=5.0) for i in range(22)]
    m = metrics(recs)
    assert m.pos == 78.0 and m.por == 78.0
    assert m.loc_mean_m == 1.0
    m_all = metrics(recs, include_invalid=True)
    assert m_all.loc_mean_m == pytest.approx((78 + 22 * 500) / 100)
    assert m_all.pos == 78.0


def test_metrics_empty():
    with pytest.raises(EmptyInput):
        metrics([])


def test_metrics_no_valid_records():
    m = metrics([rec(0, 50.0, lg=3.0)])
    assert m.pos == 0.0 and m.loc_mean_m is None and m.loc_below == {}
    row = report_row("x", m)
    assert row["loc_mean_m"] is None and row["loc_lt_1m"] is None


def test_prediction_on_invalid_record_rejected():
    with pytest.raises(FormatError):
        EvalRecord("a", False, 3.0, predicted=GT)


def test_lower_median():
    assert lower_median([4, 1, 3, 2]) == 2
    assert lower_median([5]) == 5


def test_by_split():
    recs = [rec(0, 1.0, split="a"), rec(1, 20.0, lg=1.0, split="b"), rec(2, 2.0, split="b")]
    out = metrics_by_split(recs)
    assert list(out) == ["a", "b", "all"]
    assert out["all"].n_records == 3 and out["b"].n_selected == 1


@given(st.lists(st.tuples(st.floats(0, 50), st.floats(0, 180), st.floats(-10, 10)), min_size=1, max_size=30),
       st.randoms(use_true_random=False))
def test_metrics_permutation_invariant_and_partition(rows, rnd):
    recs = [rec(i, e, o, lg) for i, (e, o, lg) in enumerate(rows)]
    m = metrics(recs)
    c = m.confusion
    assert c.tp + c.fp + c.tn + c.fn == len(recs)
    shuffled = list(recs)
    rnd.shuffle(shuffled)
    m2 = metrics(shuffled)
    assert m2.loc_median_m == m.loc_median_m and m2.confusion == c and m2.loc_below == m.loc_below
    if m.loc_mean_m is not None:
        assert m2.loc_mean_m == pytest.approx(m.loc_mean_m)
    for v in list(m.loc_below.values()) + list(m.ori_below.values()) + [m.pos]:
        assert 0.0 <= v <= 100.0
    if c.potn is not None and c.rotn is not None and c.potn + c.rotn > 0:
        assert c.f1 == pytest.approx(2 * c.potn * c.rotn / (c.potn + c.rotn))
