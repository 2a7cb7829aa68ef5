"""Resource measurements: batch inference time, model size, peak RAM.

Inference is timed on the whole batch with ``time.perf_counter_ns`` and BLAS
pools limited to one thread, after warmup calls. Peak RAM is the process
resident-set high-water mark. On Linux the mark is reset through
``/proc/self/clear_refs`` before the task so the reading belongs to that task
alone; elsewhere ``ru_maxrss`` gives the lifetime maximum.
"""

from __future__ import annotations

import datetime as _dt
import platform
import resource
import statistics
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np
from threadpoolctl import threadpool_limits

__all__ = [
    "MB",
    "RAM_NOTE",
    "TimingReport",
    "RamReport",
    "ResourceReport",
    "time_inference",
    "measure_model_size",
    "measure_peak_ram",
    "current_rss_mb",
    "environment_capture",
]

MB = float(2**20)
RAM_NOTE = (
    "peak RAM is the process-wide resident high-water mark and includes "
    "interpreter, library and harness overhead"
)

_PROC_STATUS = Path("/proc/self/status")
_PROC_CLEAR_REFS = Path("/proc/self/clear_refs")


@dataclass(frozen=True)
class TimingReport:
    total_batch_ms: float
    per_sample_us: float
    repeats: int
    warmup_runs: int
    sample_count: int
    raw_ms: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "total_batch_ms": self.total_batch_ms,
            "per_sample_us": self.per_sample_us,
            "repeats": self.repeats,
            "warmup_runs": self.warmup_runs,
            "sample_count": self.sample_count,
            "raw_ms": list(self.raw_ms),
        }


def time_inference(
    scorer: Callable[[np.ndarray], Any], X: np.ndarray, repeats: int = 5, warmup: int = 1
) -> TimingReport:
    """Median wall time of ``scorer(X)`` over ``repeats`` runs after ``warmup`` runs.

    Only the call itself is inside the timed region. BLAS/OpenMP pools are
    held to a single thread for the whole measurement.
    """
    if repeats < 3:
        raise ValueError(f"repeats must be at least 3, got {repeats}")
    if warmup < 1:
        raise ValueError(f"warmup must be at least 1, got {warmup}")
    n = len(X)
    if n == 0:
        raise ValueError("cannot time inference on an empty batch")

    raw: list[float] = []
    with threadpool_limits(limits=1):
        for _ in range(warmup):
            scorer(X)
        for _ in range(repeats):
            start = time.perf_counter_ns()
            scorer(X)
            raw.append((time.perf_counter_ns() - start) / 1e6)
    total = statistics.median(raw)
    return TimingReport(
        total_batch_ms=total,
        per_sample_us=1000.0 * total / n,
        repeats=repeats,
        warmup_runs=warmup,
        sample_count=n,
        raw_ms=tuple(raw),
    )


def measure_model_size(data: bytes) -> int:
    return len(data)


def _status_kb(field: str) -> int | None:
    try:
        for line in _PROC_STATUS.read_text().splitlines():
            if line.startswith(field + ":"):
                return int(line.split()[1])
    except (OSError, ValueError, IndexError):
        return None
    return None


def current_rss_mb() -> float | None:
    kb = _status_kb("VmRSS")
    return None if kb is None else kb * 1024 / MB


def _reset_high_water_mark() -> bool:
    try:
        _PROC_CLEAR_REFS.write_text("5")
    except OSError:
        return False
    return True


def _ru_maxrss_mb() -> float | None:
    try:
        peak = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    except (OSError, ValueError):
        return None
    # bytes on macOS, kilobytes elsewhere
    return peak / MB if sys.platform == "darwin" else peak * 1024 / MB


@dataclass(frozen=True)
class RamReport:
    """Peak RAM for one task. ``peak_mb`` is None when the platform cannot tell."""

    peak_mb: float | None
    baseline_mb: float | None
    method: str
    result: Any = None

    @property
    def supported(self) -> bool:
        return self.peak_mb is not None

    def to_dict(self) -> dict:
        return {
            "peak_ram_mb": self.peak_mb if self.supported else "unsupported",
            "baseline_mb": self.baseline_mb,
            "method": self.method,
            "note": RAM_NOTE,
        }


def measure_peak_ram(task: Callable[[], Any]) -> RamReport:
    """Run ``task`` and report the resident high-water mark reached while it ran."""
    baseline = current_rss_mb()
    if baseline is not None and _reset_high_water_mark():
        result = task()
        end = current_rss_mb()
        hwm_kb = _status_kb("VmHWM")
        samples = [x for x in (baseline, end, None if hwm_kb is None else hwm_kb * 1024 / MB) if x is not None]
        return RamReport(max(samples), baseline, "VmHWM after clear_refs reset", result)

    start_peak = _ru_maxrss_mb()
    result = task()
    end_peak = _ru_maxrss_mb()
    if end_peak is None:
        return RamReport(None, baseline, "unsupported", result)
    samples = [x for x in (baseline, start_peak, end_peak) if x is not None]
    return RamReport(max(samples), baseline if baseline is not None else start_peak,
                     "ru_maxrss (process lifetime maximum)", result)


@dataclass(frozen=True)
class ResourceReport:
    model_size_bytes: int
    peak_ram_mb: float | None
    timing: TimingReport
    ram_method: str = ""

    def to_dict(self) -> dict:
        return {
            "model_size_bytes": self.model_size_bytes,
            "peak_ram_mb": self.peak_ram_mb if self.peak_ram_mb is not None else "unsupported",
            "ram_method": self.ram_method,
            "ram_note": RAM_NOTE,
            "timing": self.timing.to_dict(),
        }


def _cpu_name() -> str:
    try:
        for line in Path("/proc/cpuinfo").read_text().splitlines():
            if line.startswith("model name"):
                return line.split(":", 1)[1].strip()
    except OSError:
        pass
    return platform.processor() or platform.machine()


def environment_capture() -> dict:
    return {
        "os": f"{platform.system()} {platform.release()}",
        "machine": platform.machine(),
        "cpu": _cpu_name(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
