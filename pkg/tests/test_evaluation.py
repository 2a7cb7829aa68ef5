from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iotad.evaluation import (
    NO_ACTUAL_POSITIVES,
    NO_POSITIVE_PREDICTIONS,
    ConfusionMatrix,
    accuracy,
    confusion,
    f1,
    metrics_report,
    normalized_confusion,
    precision,
    recall,
)

counts = st.integers(0, 10_000)
percents = st.floats(0, 100, allow_nan=False)


class TestConfusion:
    def test_one_of_each(self):
        assert confusion([1, 0, 1, 0], [1, 0, 0, 1]) == ConfusionMatrix(tp=1, tn=1, fp=1, fn=1)

    def test_perfect(self):
        cm = confusion([1, 0, 0, 1, 1], [1, 0, 0, 1, 1])
        assert cm.fp == cm.fn == 0

    def test_inverted(self):
        truth = np.array([1, 0, 0, 1, 1])
        cm = confusion(truth, 1 - truth)
        assert cm.tp == cm.tn == 0

    @pytest.mark.parametrize("truth, pred", [([1, 0], [1]), ([], []), ([2, 0], [1, 0]), ([1, 0], [1, -1])])
    def test_invalid(self, truth, pred):
        with pytest.raises(ValueError):
            confusion(truth, pred)

    def test_negative_cell(self):
        with pytest.raises(ValueError):
            ConfusionMatrix(1, 1, -1, 0)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=60), st.randoms())
    def test_permutation_invariant(self, pairs, rnd):
        shuffled = list(pairs)
        rnd.shuffle(shuffled)
        a = confusion([t for t, _ in pairs], [p for _, p in pairs])
        b = confusion([t for t, _ in shuffled], [p for _, p in shuffled])
        assert a == b


class TestAccuracy:
    @pytest.mark.parametrize("cells, expected", [((50, 50, 0, 0), 100.0), ((8, 88, 2, 2), 96.0), ((25, 25, 25, 25), 50.0)])
    def test_examples(self, cells, expected):
        assert accuracy(ConfusionMatrix(*cells)) == expected

    def test_empty(self):
        with pytest.raises(ValueError):
            accuracy(ConfusionMatrix(0, 0, 0, 0))


class TestPrecisionRecall:
    def test_precision_example(self):
        assert precision(ConfusionMatrix(tp=8, tn=0, fp=2, fn=0)) == 80.0

    def test_recall_example(self):
        assert recall(ConfusionMatrix(tp=8, tn=0, fp=0, fn=2)) == 80.0

    def test_no_false_alarms(self):
        assert precision(ConfusionMatrix(tp=3, tn=9, fp=0, fn=4)) == 100.0

    def test_no_misses(self):
        assert recall(ConfusionMatrix(tp=3, tn=9, fp=4, fn=0)) == 100.0

    def test_nothing_flagged(self):
        report = metrics_report(ConfusionMatrix(tp=0, tn=10, fp=0, fn=3))
        assert report.precision == 0.0 and report.f1 == 0.0
        assert NO_POSITIVE_PREDICTIONS in report.flags

    def test_no_anomalies(self):
        report = metrics_report(ConfusionMatrix(tp=0, tn=10, fp=2, fn=0))
        assert report.recall == 0.0
        assert NO_ACTUAL_POSITIVES in report.flags

    def test_fractions_mirror_percent(self):
        report = metrics_report(ConfusionMatrix(8, 88, 2, 2))
        assert report.fractions == {"accuracy": 0.96, "precision": 0.8, "recall": 0.8, "f1": 0.8}
        assert report.flags == ()


class TestF1:
    @pytest.mark.parametrize("p, r, num, den", [(84, 86, 2 * 84 * 86, 170), (72, 76, 2 * 72 * 76, 148)])
    def test_harmonic_mean_exact(self, p, r, num, den):
        # the ±0.05 row check lives in the acceptance suite
        assert f1(float(p), float(r)) == pytest.approx(num / den, abs=1e-12)

    def test_zero(self):
        assert f1(0.0, 0.0) == 0.0

    @settings(max_examples=200, deadline=None)
    @given(percents)
    def test_equal_inputs(self, x):
        assert f1(x, x) == x

    @settings(max_examples=200, deadline=None)
    @given(percents, percents)
    def test_symmetric_and_bounded(self, p, r):
        v = f1(p, r)
        assert v == f1(r, p)
        assert v <= max(p, r)
        if p > 0 and r > 0:
            assert v >= min(p, r)


class TestNormalized:
    def test_example(self):
        nc = normalized_confusion(ConfusionMatrix(tp=93, tn=95, fp=5, fn=7))
        assert nc.tpr == 0.93 and nc.tnr == 0.95
        assert nc.fpr == 0.05 and nc.fnr == 0.07

    def test_perfect(self):
        nc = normalized_confusion(ConfusionMatrix(5, 7, 0, 0))
        assert nc.tpr == nc.tnr == 1.0

    def test_all_missed(self):
        assert normalized_confusion(ConfusionMatrix(tp=0, tn=4, fp=0, fn=10)).tpr == 0.0

    def test_empty_row_flagged(self):
        nc = normalized_confusion(ConfusionMatrix(tp=0, tn=4, fp=1, fn=0))
        assert math.isnan(nc.tpr) and NO_ACTUAL_POSITIVES in nc.flags
        assert nc.to_dict()["tpr"] is None


def reference(cm: ConfusionMatrix):
    """Single pass over an expanded label list, written without the library helpers."""
    tp = tn = fp = fn = 0
    for cell, k in (("tp", cm.tp), ("tn", cm.tn), ("fp", cm.fp), ("fn", cm.fn)):
        for _ in range(k):
            if cell == "tp":
                tp += 1
            elif cell == "tn":
                tn += 1
            elif cell == "fp":
                fp += 1
            else:
                fn += 1
    n = tp + tn + fp + fn
    acc = 100 * (tp + tn) / n
    prec = 100 * tp / (tp + fp) if tp + fp else 0.0
    rec = 100 * tp / (tp + fn) if tp + fn else 0.0
    f = 200 * tp / (2 * tp + fp + fn) if tp else 0.0
    return acc, prec, rec, f


class TestSelfOracle:
    def test_thousand_random_matrices(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            cm = ConfusionMatrix(*(int(v) for v in rng.integers(0, 60, size=4)))
            if cm.total == 0:
                continue
            acc, prec, rec, f = reference(cm)
            report = metrics_report(cm)
            assert report.accuracy == acc
            assert report.precision == prec
            assert report.recall == rec
            assert report.f1 == pytest.approx(f, rel=1e-12, abs=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(counts, counts, counts, counts)
    def test_accuracy_rate_identity(self, tp, tn, fp, fn):
        cm = ConfusionMatrix(tp, tn, fp, fn)
        pos, neg = tp + fn, tn + fp
        if pos == 0 or neg == 0:
            return
        nc = normalized_confusion(cm)
        rebuilt = (nc.tpr * pos + nc.tnr * neg) / cm.total * 100
        assert rebuilt == pytest.approx(accuracy(cm), rel=1e-12)
