"""Unsupervised anomaly detection for IoT telemetry.

Isolation Forest and a nu one-class SVM, both trained on normal-only data,
plus the tooling to benchmark them on detection quality (accuracy,
precision, recall, F1) and on resources (batch inference time, serialized
model size, peak RAM).
"""

from iotad.dataset import (
    IngestSchema,
    ScalerParams,
    SyntheticSpec,
    TelemetryFrame,
    apply_minmax,
    filter_normal,
    fit_minmax,
    generate_synthetic,
    load_csv,
    split_train_test,
    write_csv,
)
from iotad.errors import ConfigError, DataError, ModelFormatError, PipelineError
from iotad.evaluation import ConfusionMatrix, MetricsReport, confusion, metrics_report
from iotad.iforest import IForestParams, IsolationForestModel, fit_iforest
from iotad.ocsvm import OcSvmModel, OcSvmParams, fit_ocsvm
from iotad.pipeline import RunConfig, load_config, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConfusionMatrix",
    "DataError",
    "IForestParams",
    "IngestSchema",
    "IsolationForestModel",
    "MetricsReport",
    "ModelFormatError",
    "OcSvmModel",
    "OcSvmParams",
    "PipelineError",
    "RunConfig",
    "ScalerParams",
    "SyntheticSpec",
    "TelemetryFrame",
    "apply_minmax",
    "confusion",
    "filter_normal",
    "fit_iforest",
    "fit_minmax",
    "fit_ocsvm",
    "generate_synthetic",
    "load_config",
    "load_csv",
    "metrics_report",
    "run_pipeline",
    "split_train_test",
    "write_csv",
]
