"""Confusion matrices and the four classification metrics, in percent.

Anomaly is the positive class. Degenerate denominators (no positive
predictions, no actual anomalies) yield 0.0 and a flag on the report rather
than an exception, so a benchmark still completes when a detector predicts
only one class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ConfusionMatrix",
    "MetricsReport",
    "NormalizedConfusion",
    "NO_POSITIVE_PREDICTIONS",
    "NO_ACTUAL_POSITIVES",
    "confusion",
    "accuracy",
    "precision",
    "recall",
    "f1",
    "metrics_report",
    "normalized_confusion",
]

NO_POSITIVE_PREDICTIONS = "no positive predictions"
NO_ACTUAL_POSITIVES = "no actual positives"
NO_ACTUAL_NEGATIVES = "no actual negatives"


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self) -> None:
        for name in ("tp", "tn", "fp", "fn"):
            value = getattr(self, name)
            if int(value) != value or value < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {value}")
            object.__setattr__(self, name, int(value))

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def to_dict(self) -> dict:
        return {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}


def confusion(truth, predicted) -> ConfusionMatrix:
    truth = np.asarray(truth).astype(np.int64).ravel()
    predicted = np.asarray(predicted).astype(np.int64).ravel()
    if truth.shape != predicted.shape:
        raise ValueError(f"length mismatch: {truth.size} labels vs {predicted.size} predictions")
    if truth.size == 0:
        raise ValueError("cannot build a confusion matrix from empty input")
    for arr, name in ((truth, "truth"), (predicted, "predicted")):
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError(f"{name} must contain only 0 and 1")
    pos = truth == 1
    hit = predicted == 1
    return ConfusionMatrix(
        tp=int(np.sum(pos & hit)),
        tn=int(np.sum(~pos & ~hit)),
        fp=int(np.sum(~pos & hit)),
        fn=int(np.sum(pos & ~hit)),
    )


# Integer numerators keep these correctly rounded: int / int is exact-then-round.


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise ValueError("accuracy of an empty confusion matrix is undefined")
    return 100 * (cm.tp + cm.tn) / cm.total


def precision(cm: ConfusionMatrix) -> float:
    """Share of flagged samples that are real anomalies; 0.0 when nothing was flagged."""
    predicted_pos = cm.tp + cm.fp
    return 100 * cm.tp / predicted_pos if predicted_pos else 0.0


def recall(cm: ConfusionMatrix) -> float:
    actual_pos = cm.tp + cm.fn
    return 100 * cm.tp / actual_pos if actual_pos else 0.0


def f1(precision_pct: float, recall_pct: float) -> float:
    """Harmonic mean of precision and recall (both in percent)."""
    denom = precision_pct + recall_pct
    if denom <= 0:
        return 0.0
    value = 2 * precision_pct * recall_pct / denom
    # the mean lies between its inputs; clamp away the last-ulp rounding
    return min(max(value, min(precision_pct, recall_pct)), max(precision_pct, recall_pct))


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    fractions: dict[str, float] = field(default_factory=dict)
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "fractions": dict(self.fractions),
            "flags": list(self.flags),
        }


def metrics_report(cm: ConfusionMatrix) -> MetricsReport:
    flags = []
    if cm.tp + cm.fp == 0:
        flags.append(NO_POSITIVE_PREDICTIONS)
    if cm.tp + cm.fn == 0:
        flags.append(NO_ACTUAL_POSITIVES)
    acc, prec, rec = accuracy(cm), precision(cm), recall(cm)
    score = f1(prec, rec)
    return MetricsReport(
        accuracy=acc,
        precision=prec,
        recall=rec,
        f1=score,
        fractions={"accuracy": acc / 100, "precision": prec / 100, "recall": rec / 100, "f1": score / 100},
        flags=tuple(flags),
    )


@dataclass(frozen=True)
class NormalizedConfusion:
    """Row-normalized matrix. Rates of an empty row are NaN and flagged."""

    tpr: float
    tnr: float
    fpr: float
    fnr: float
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        def clean(x: float) -> float | None:
            return None if math.isnan(x) else x

        return {
            "tpr": clean(self.tpr),
            "tnr": clean(self.tnr),
            "fpr": clean(self.fpr),
            "fnr": clean(self.fnr),
            "flags": list(self.flags),
        }


def normalized_confusion(cm: ConfusionMatrix) -> NormalizedConfusion:
    flags = []
    pos = cm.tp + cm.fn
    neg = cm.tn + cm.fp
    if pos:
        tpr, fnr = cm.tp / pos, cm.fn / pos
    else:
        tpr = fnr = math.nan
        flags.append(NO_ACTUAL_POSITIVES)
    if neg:
        tnr, fpr = cm.tn / neg, cm.fp / neg
    else:
        tnr = fpr = math.nan
        flags.append(NO_ACTUAL_NEGATIVES)
    return NormalizedConfusion(tpr, tnr, fpr, fnr, tuple(flags))
