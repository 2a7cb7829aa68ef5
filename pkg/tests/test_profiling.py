from __future__ import annotations

import math
import statistics
import time

import numpy as np
import pytest

from iotad.iforest import IForestParams, deserialize_iforest, fit_iforest, serialize_iforest
from iotad.profiling import (
    MB,
    RAM_NOTE,
    environment_capture,
    measure_model_size,
    measure_peak_ram,
    time_inference,
)


class TestTiming:
    def test_constant_scorer(self):
        rep = time_inference(lambda X: 0, np.zeros((10, 2)))
        assert rep.total_batch_ms >= 0
        assert rep.per_sample_us == pytest.approx(1000 * rep.total_batch_ms / 10)

    def test_median_of_raw(self):
        rep = time_inference(lambda X: X.sum(), np.ones((1000, 4)), repeats=5)
        assert len(rep.raw_ms) == 5
        assert rep.total_batch_ms == statistics.median(rep.raw_ms)

    def test_median_order_invariant(self):
        rep = time_inference(lambda X: X.sum(), np.ones((100, 2)), repeats=7)
        raw = list(rep.raw_ms)
        rng = np.random.default_rng(0)
        for _ in range(10):
            rng.shuffle(raw)
            assert statistics.median(raw) == rep.total_batch_ms

    def test_sentinel_scorer(self):
        inner: list[float] = []

        def scorer(X):
            start = time.perf_counter_ns()
            time.sleep(0.02)
            inner.append((time.perf_counter_ns() - start) / 1e6)

        rep = time_inference(scorer, np.zeros((5, 1)), repeats=5, warmup=1)
        timed = inner[1:]
        assert rep.total_batch_ms == pytest.approx(statistics.median(timed), rel=0.05)

    def test_warmup_runs_not_timed(self):
        calls = []
        rep = time_inference(lambda X: calls.append(1), np.zeros((3, 1)), repeats=3, warmup=2)
        assert len(calls) == 5 and len(rep.raw_ms) == 3 and rep.warmup_runs == 2

    @pytest.mark.parametrize("kwargs", [{"repeats": 2}, {"warmup": 0}])
    def test_bad_repeats(self, kwargs):
        with pytest.raises(ValueError):
            time_inference(lambda X: 0, np.zeros((3, 1)), **kwargs)

    def test_empty_batch(self):
        with pytest.raises(ValueError, match="empty"):
            time_inference(lambda X: 0, np.zeros((0, 2)))


class TestModelSize:
    def test_empty(self):
        assert measure_model_size(b"") == 0

    def test_default_forest_and_canonical(self):
        X = np.random.default_rng(0).random((1000, 4))
        blob = serialize_iforest(fit_iforest(X, IForestParams(seed=3)))
        size = measure_model_size(blob)
        assert size > 0
        assert measure_model_size(serialize_iforest(deserialize_iforest(blob))) == size

    def test_doubling_trees(self):
        X = np.random.default_rng(0).random((1000, 4))
        a = measure_model_size(serialize_iforest(fit_iforest(X, IForestParams(tree_count=100, seed=3))))
        b = measure_model_size(serialize_iforest(fit_iforest(X, IForestParams(tree_count=200, seed=3))))
        assert b > a


class TestPeakRam:
    def test_noop(self):
        rep = measure_peak_ram(lambda: None)
        if not rep.supported:
            pytest.skip("no RSS source on this platform")
        assert math.isfinite(rep.peak_mb)
        assert rep.peak_mb >= rep.baseline_mb

    def test_result_passthrough(self):
        assert measure_peak_ram(lambda: 41 + 1).result == 42

    def test_sixty_four_megabytes(self):
        def task():
            buf = np.empty(64 * 2**20, dtype=np.uint8)
            buf[::4096] = 1  # touch every page
            return int(buf[::4096].sum())

        rep = measure_peak_ram(task)
        if not rep.supported:
            pytest.skip("no RSS source on this platform")
        if rep.method.startswith("ru_maxrss"):
            pytest.skip("lifetime maximum cannot isolate a single task")
        assert rep.peak_mb >= rep.baseline_mb + 60

    def test_report_carries_note(self):
        d = measure_peak_ram(lambda: None).to_dict()
        assert d["note"] == RAM_NOTE

    def test_megabyte_is_binary(self):
        assert MB == 1048576.0


def test_environment_capture_fields():
    env = environment_capture()
    assert set(env) == {"os", "machine", "cpu", "python", "numpy", "timestamp"}
