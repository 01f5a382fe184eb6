"""Localisation metrics and NFA-based reliability scoring."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import EmptyInput, FormatError
from .geometry import CameraPose, circular_difference

LOC_THRESHOLDS_M = (1.0, 3.0, 5.0, 8.0, 10.0)
ORI_THRESHOLDS_DEG = (1.0, 3.0, 5.0, 8.0, 10.0)
NEGATIVE_ERROR_M = 10.0

RULE_ERROR = "error"
RULE_REFERENCE = "reference"


@dataclass(frozen=True)
class EvalRecord:
    """One localisation outcome paired with whatever truth is known.

    ``predicted`` is only present for valid results; ``estimate`` is the
    refined pose regardless of validity.
    """

    id: str
    valid: bool
    lg_eps: float
    predicted: Optional[CameraPose] = None
    estimate: Optional[CameraPose] = None
    ground_truth: Optional[CameraPose] = None
    reference_correct: Optional[bool] = None
    meters_per_pixel: float = 1.0
    split: str = "all"

    def __post_init__(self):
        if self.predicted is not None and not self.valid:
            raise FormatError(f"record {self.id}: prediction present on an invalid result")


def localization_error(pred: CameraPose, gt: CameraPose, mpp: float) -> float:
    return math.hypot(pred.x - gt.x, pred.y - gt.y) * mpp


def orientation_error(pred: CameraPose, gt: CameraPose) -> float:
    return circular_difference(pred.heading, gt.heading)


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int
    potn: Optional[float]
    rotn: Optional[float]
    f1: Optional[float]
    acc: float

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def _ratio(a: int, b: int) -> Optional[float]:
    return a / b if b else None


def rates_from_counts(tp: int, fp: int, tn: int, fn: int) -> Confusion:
    """Negative-class precision/recall, their harmonic mean, and accuracy."""
    total = tp + fp + tn + fn
    if total == 0:
        raise EmptyInput("no records")
    potn = _ratio(tn, tn + fn)
    rotn = _ratio(tn, tn + fp)
    f1 = None
    if potn is not None and rotn is not None and potn + rotn > 0:
        f1 = 2.0 * potn * rotn / (potn + rotn)
    return Confusion(tp, fp, tn, fn, potn, rotn, f1, (tn + tp) / total)


def is_true_negative(r: EvalRecord, rule: str, use_estimate: bool = True) -> bool:
    """Whether a record is a failed case (error above 10 m, or wrong reference)."""
    if rule == RULE_REFERENCE:
        if r.reference_correct is None:
            raise FormatError(f"record {r.id}: reference_correct missing")
        return not r.reference_correct
    if rule != RULE_ERROR:
        raise ValueError(f"unknown negative rule {rule!r}")
    if r.ground_truth is None:
        raise FormatError(f"record {r.id}: ground truth missing")
    pose = r.estimate if (use_estimate and r.estimate is not None) else r.predicted
    if pose is None:
        return True
    return localization_error(pose, r.ground_truth, r.meters_per_pixel) > NEGATIVE_ERROR_M


def confusion_and_rates(records: Sequence[EvalRecord], tau: float = 0.0,
                        negative_rule: str = RULE_ERROR) -> Confusion:
    """Score the ``lg_eps < tau`` decision against the truth rule.

    A record is predicted negative iff ``lg_eps >= tau``.
    """
    if not records:
        raise EmptyInput("no records")
    tp = fp = tn = fn = 0
    for r in records:
        neg_pred = r.lg_eps >= tau
        neg_true = is_true_negative(r, negative_rule)
        if neg_true:
            tn += neg_pred
            fp += not neg_pred
        else:
            fn += neg_pred
            tp += not neg_pred
    return rates_from_counts(tp, fp, tn, fn)


def lower_median(values) -> float:
    v = sorted(values)
    return float(v[(len(v) - 1) // 2])


@dataclass(frozen=True)
class MetricsReport:
    n_records: int
    n_selected: int
    pos: float
    loc_mean_m: Optional[float] = None
    loc_median_m: Optional[float] = None
    ori_mean_deg: Optional[float] = None
    ori_median_deg: Optional[float] = None
    loc_below: Dict[float, float] = field(default_factory=dict)
    ori_below: Dict[float, float] = field(default_factory=dict)
    confusion: Optional[Confusion] = None

    @property
    def por(self) -> float:
        return self.pos


def _pct_below(errors: np.ndarray, thresholds) -> Dict[float, float]:
    return {t: 100.0 * float(np.mean(errors < t)) for t in thresholds}


def metrics(records: Sequence[EvalRecord], loc_thresholds=LOC_THRESHOLDS_M,
            ori_thresholds=ORI_THRESHOLDS_DEG, include_invalid: bool = False,
            tau: float = 0.0, negative_rule: Optional[str] = RULE_ERROR) -> MetricsReport:
    """Error statistics over selected records plus the reliability confusion.

    By default only valid records enter the error statistics; with
    ``include_invalid`` every record with an estimate does.  Medians take
    the lower middle element.  Pass ``negative_rule=None`` to skip the
    confusion table.
    """
    if not records:
        raise EmptyInput("no records")
    n_sel = sum(r.valid for r in records)
    loc, ori = [], []
    for r in records:
        if not (r.valid or include_invalid) or r.ground_truth is None:
            continue
        pose = r.predicted if r.valid else r.estimate
        if pose is None:
            continue
        loc.append(localization_error(pose, r.ground_truth, r.meters_per_pixel))
        ori.append(orientation_error(pose, r.ground_truth))
    conf = confusion_and_rates(records, tau, negative_rule) if negative_rule else None
    report = dict(n_records=len(records), n_selected=n_sel, pos=100.0 * n_sel / len(records),
                  confusion=conf)
    if loc:
        la, oa = np.array(loc), np.array(ori)
        report.update(
            loc_mean_m=float(la.mean()), loc_median_m=lower_median(la),
            ori_mean_deg=float(oa.mean()), ori_median_deg=lower_median(oa),
            loc_below=_pct_below(la, loc_thresholds), ori_below=_pct_below(oa, ori_thresholds),
        )
    return MetricsReport(**report)


def metrics_by_split(records: Sequence[EvalRecord], **kwargs) -> Dict[str, MetricsReport]:
    """Reports keyed by split name, plus ``"all"`` when several splits exist."""
    groups: Dict[str, List[EvalRecord]] = {}
    for r in records:
        groups.setdefault(r.split, []).append(r)
    out = {name: metrics(rs, **kwargs) for name, rs in sorted(groups.items())}
    if len(groups) > 1:
        out["all"] = metrics(records, **kwargs)
    return out


def report_row(split: str, m: MetricsReport) -> Dict[str, object]:
    """Flat CSV row; undefined values are ``None``."""
    row: Dict[str, object] = {
        "split": split, "n": m.n_records, "n_selected": m.n_selected, "pos": m.pos,
        "loc_mean_m": m.loc_mean_m, "loc_median_m": m.loc_median_m,
        "ori_mean_deg": m.ori_mean_deg, "ori_median_deg": m.ori_median_deg,
    }
    for t in LOC_THRESHOLDS_M:
        row[f"loc_lt_{t:g}m"] = m.loc_below.get(t)
    for t in ORI_THRESHOLDS_DEG:
        row[f"ori_lt_{t:g}deg"] = m.ori_below.get(t)
    c = m.confusion
    for k in ("tp", "fp", "tn", "fn", "potn", "rotn", "f1", "acc"):
        row[k] = getattr(c, k) if c is not None else None
    return row
