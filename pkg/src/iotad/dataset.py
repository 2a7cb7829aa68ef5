"""Telemetry ingestion, min-max scaling, train/test splitting and synthetic data.

Frames are immutable: every operation returns a new :class:`TelemetryFrame`
and never modifies its input.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from iotad.errors import DataError

__all__ = [
    "TelemetryFrame",
    "ScalerParams",
    "IngestSchema",
    "SyntheticSpec",
    "load_csv",
    "write_csv",
    "fit_minmax",
    "apply_minmax",
    "split_train_test",
    "filter_normal",
    "generate_synthetic",
]


@dataclass(frozen=True)
class TelemetryFrame:
    """Feature matrix plus binary labels (0 = normal, 1 = anomaly)."""

    feature_names: tuple[str, ...]
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int8)
        if features.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {features.shape}")
        if labels.ndim != 1 or labels.shape[0] != features.shape[0]:
            raise DataError(
                f"labels length {labels.shape[0]} does not match {features.shape[0]} rows"
            )
        if len(self.feature_names) != features.shape[1] or features.shape[1] < 1:
            raise DataError(
                f"{len(self.feature_names)} feature names for {features.shape[1]} columns"
            )
        if not np.all(np.isfinite(features)):
            raise DataError("features contain NaN or infinite values")
        if labels.size and not np.all((labels == 0) | (labels == 1)):
            raise DataError("labels must be 0 or 1")
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def row_count(self) -> int:
        return int(self.features.shape[0])

    @property
    def dimension(self) -> int:
        return int(self.features.shape[1])

    def take(self, rows: Sequence[int] | np.ndarray) -> TelemetryFrame:
        """Return the subset of rows, in the order given."""
        rows = np.asarray(rows, dtype=np.intp)
        return TelemetryFrame(self.feature_names, self.features[rows], self.labels[rows])

    def with_features(self, features: np.ndarray) -> TelemetryFrame:
        return TelemetryFrame(self.feature_names, features, self.labels)


@dataclass(frozen=True)
class ScalerParams:
    minimum: np.ndarray
    maximum: np.ndarray

    def __post_init__(self) -> None:
        lo = np.asarray(self.minimum, dtype=np.float64)
        hi = np.asarray(self.maximum, dtype=np.float64)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DataError("minimum and maximum must be 1-D and of equal length")
        if np.any(lo > hi):
            raise DataError("scaler minimum exceeds maximum")
        object.__setattr__(self, "minimum", lo)
        object.__setattr__(self, "maximum", hi)

    @property
    def dimension(self) -> int:
        return int(self.minimum.shape[0])

    def to_dict(self) -> dict:
        return {"minimum": self.minimum.tolist(), "maximum": self.maximum.tolist()}


@dataclass(frozen=True)
class IngestSchema:
    """How to map CSV columns onto features and labels.

    Columns listed in ``drop_columns`` are removed when present and silently
    skipped otherwise. The ``type_column`` (attack category in TON_IoT) is read
    past and never used as a feature.
    """

    drop_columns: tuple[str, ...] = ("ts", "date", "time")
    label_column: str = "label"
    type_column: str = "type"
    label_positive_values: frozenset[str] = field(default_factory=lambda: frozenset({"1"}))

    def to_dict(self) -> dict:
        return {
            "drop_columns": list(self.drop_columns),
            "label_column": self.label_column,
            "type_column": self.type_column,
            "label_positive_values": sorted(self.label_positive_values),
        }


@dataclass(frozen=True)
class SyntheticSpec:
    """Desk-scale stand-in for thermostat telemetry.

    Normal rows come from an isotropic Gaussian at the origin; anomalies are
    uniform in a box with the ``3 * normal_cluster_spread`` ball carved out,
    so the two classes are separable by construction.
    """

    normal_count: int = 2000
    anomaly_count: int = 200
    dimension: int = 4
    normal_cluster_spread: float = 1.0
    anomaly_box_halfwidth: float = 6.0

    def __post_init__(self) -> None:
        if self.normal_count < 1:
            raise DataError("normal_count must be positive")
        if self.anomaly_count < 0:
            raise DataError("anomaly_count must be non-negative")
        if self.dimension < 1:
            raise DataError("dimension must be positive")
        if self.normal_cluster_spread <= 0:
            raise DataError("normal_cluster_spread must be positive")
        if not self.anomaly_box_halfwidth > 3 * self.normal_cluster_spread:
            raise DataError("anomaly_box_halfwidth must exceed 3 * normal_cluster_spread")

    def to_dict(self) -> dict:
        return {
            "normal_count": self.normal_count,
            "anomaly_count": self.anomaly_count,
            "dimension": self.dimension,
            "normal_cluster_spread": self.normal_cluster_spread,
            "anomaly_box_halfwidth": self.anomaly_box_halfwidth,
        }


def load_csv(path: str | Path, schema: IngestSchema | None = None) -> TelemetryFrame:
    """Read a telemetry CSV into a frame.

    Retained columns keep their header order. Data rows are numbered from 1
    in error messages (the header is not counted).

    Raises:
        DataError: on a missing file, a missing label column, an empty data
            section or any non-numeric / non-finite retained value.
    """
    schema = schema or IngestSchema()
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing file: {path}")

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, no header row") from None

        if schema.label_column not in header:
            raise DataError(f"{path}: missing label column '{schema.label_column}'")
        label_idx = header.index(schema.label_column)
        skip = set(schema.drop_columns) | {schema.label_column, schema.type_column}
        keep = [i for i, name in enumerate(header) if name not in skip]
        if not keep:
            raise DataError(f"{path}: no feature columns left after dropping")

        rows: list[list[float]] = []
        labels: list[int] = []
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}: row {row_no} has {len(row)} fields, header has {len(header)}"
                )
            values = []
            for i in keep:
                cell = row[i].strip()
                try:
                    value = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: non-numeric value {cell!r} at row {row_no}, column '{header[i]}'"
                    ) from None
                if not math.isfinite(value):
                    raise DataError(
                        f"{path}: non-finite value {cell!r} at row {row_no}, column '{header[i]}'"
                    )
                values.append(value)
            rows.append(values)
            labels.append(1 if row[label_idx].strip() in schema.label_positive_values else 0)

    if not rows:
        raise DataError(f"{path}: empty data section")
    return TelemetryFrame(
        tuple(header[i] for i in keep),
        np.array(rows, dtype=np.float64),
        np.array(labels, dtype=np.int8),
    )


def write_csv(frame: TelemetryFrame, path: str | Path) -> Path:
    """Write ``frame`` as CSV with its feature columns followed by ``label``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([*frame.feature_names, "label"])
        for values, label in zip(frame.features, frame.labels):
            writer.writerow([repr(float(v)) for v in values] + [int(label)])
    return path


def fit_minmax(train: TelemetryFrame) -> ScalerParams:
    if train.row_count < 1:
        raise DataError("cannot fit min-max scaler on an empty frame")
    return ScalerParams(train.features.min(axis=0), train.features.max(axis=0))


def apply_minmax(frame: TelemetryFrame, params: ScalerParams) -> TelemetryFrame:
    """Map each column onto ``(x - min) / (max - min)``.

    Constant training columns map to 0.0. Values outside the training range
    are not clamped, so scaled test rows may leave [0, 1].
    """
    if frame.dimension != params.dimension:
        raise DataError(
            f"dimension mismatch: frame has {frame.dimension} columns, scaler {params.dimension}"
        )
    span = params.maximum - params.minimum
    constant = span == 0
    safe_span = np.where(constant, 1.0, span)
    scaled = (frame.features - params.minimum) / safe_span
    scaled[:, constant] = 0.0
    return frame.with_features(scaled)


def split_train_test(
    frame: TelemetryFrame, train_ratio: float = 0.7, seed: int = 0
) -> tuple[TelemetryFrame, TelemetryFrame]:
    """Shuffle rows with a seeded generator and cut at ``floor(train_ratio * n)``."""
    if not 0 < train_ratio < 1:
        raise DataError(f"train_ratio must lie in (0, 1), got {train_ratio}")
    n = frame.row_count
    if n < 2:
        raise DataError(f"need at least 2 rows to split, got {n}")
    order = np.random.default_rng(seed).permutation(n)
    cut = math.floor(train_ratio * n)
    return frame.take(order[:cut]), frame.take(order[cut:])


def filter_normal(frame: TelemetryFrame) -> TelemetryFrame:
    rows = np.flatnonzero(frame.labels == 0)
    if rows.size == 0:
        raise DataError("no normal samples")
    return frame.take(rows)


def generate_synthetic(spec: SyntheticSpec, seed: int = 0) -> TelemetryFrame:
    rng = np.random.default_rng(seed)
    d = spec.dimension
    normal = rng.normal(0.0, spec.normal_cluster_spread, size=(spec.normal_count, d))

    radius = 3.0 * spec.normal_cluster_spread
    hw = spec.anomaly_box_halfwidth
    anomalies = np.empty((0, d))
    while anomalies.shape[0] < spec.anomaly_count:
        batch = rng.uniform(-hw, hw, size=(2 * spec.anomaly_count, d))
        batch = batch[np.linalg.norm(batch, axis=1) > radius]
        anomalies = np.vstack([anomalies, batch])
    anomalies = anomalies[: spec.anomaly_count]

    labels = np.concatenate(
        [np.zeros(spec.normal_count, dtype=np.int8), np.ones(spec.anomaly_count, dtype=np.int8)]
    )
    return TelemetryFrame(
        tuple(f"f{j}" for j in range(d)), np.vstack([normal, anomalies]), labels
    )
