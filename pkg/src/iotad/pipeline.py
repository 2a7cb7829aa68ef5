"""End-to-end benchmark: ingest, split, scale, fit, evaluate, profile, report.

A report is a JSON-ready ``dict``. Everything except the ``measurements``
and ``environment`` blocks is a deterministic function of the config, so two
runs of the same config produce identical report bodies (see
:func:`report_body`).
"""

from __future__ import annotations

import copy
import csv
import json
import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np

from iotad import evaluation, iforest, ocsvm, profiling
from iotad.dataset import (
    IngestSchema,
    SyntheticSpec,
    TelemetryFrame,
    apply_minmax,
    filter_normal,
    fit_minmax,
    generate_synthetic,
    load_csv,
    split_train_test,
)
from iotad.errors import ConfigError, PipelineError

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

__all__ = [
    "SCHEMA_VERSION",
    "MODEL_NAMES",
    "TABLE_HEADER",
    "RunConfig",
    "load_config",
    "run_pipeline",
    "report_body",
    "compare_models",
    "compare_reports",
    "emit_report",
    "emit_plot_data",
    "table_rows",
]

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "iotad.report/1"
MODEL_NAMES = ("iforest", "ocsvm")
TABLE_HEADER = (
    "model", "accuracy", "precision", "recall", "f1",
    "inference_ms", "model_size_bytes", "peak_ram_mb",
)
CLASSIFICATION_METRICS = ("accuracy", "precision", "recall", "f1")
SPLIT_NOTE = "unstratified seeded shuffle, floor(ratio * n) rows to train"


@dataclass(frozen=True)
class RunConfig:
    """One benchmark run.

    Exactly one of ``csv_path`` and ``synthetic`` names the input. Model
    parameter overrides are plain mappings; a model seed not given there
    follows ``seed``.
    """

    csv_path: str | None = None
    schema: IngestSchema = field(default_factory=IngestSchema)
    synthetic: SyntheticSpec | None = None
    split_ratio: float = 0.7
    seed: int = 0
    models: str = "both"
    eval_scope: str = "test"
    iforest: Mapping[str, Any] = field(default_factory=dict)
    ocsvm: Mapping[str, Any] = field(default_factory=dict)
    repeats: int = 5
    warmup: int = 1
    output_dir: str = "iotad-run"

    def __post_init__(self) -> None:
        if (self.csv_path is None) == (self.synthetic is None):
            raise ConfigError("config needs exactly one input: a csv path or a synthetic spec")
        if self.models not in ("iforest", "ocsvm", "both"):
            raise ConfigError(f"models must be iforest, ocsvm or both, got {self.models!r}")
        if self.eval_scope not in ("test", "full"):
            raise ConfigError(f"eval_scope must be test or full, got {self.eval_scope!r}")
        if not 0 < self.split_ratio < 1:
            raise ConfigError(f"split_ratio must lie in (0, 1), got {self.split_ratio}")
        if self.repeats < 3 or self.warmup < 1:
            raise ConfigError("profiling needs repeats >= 3 and warmup >= 1")
        # surface bad model parameters at config time
        self.iforest_params()
        self.ocsvm_params()

    @property
    def selected_models(self) -> tuple[str, ...]:
        return MODEL_NAMES if self.models == "both" else (self.models,)

    def iforest_params(self) -> iforest.IForestParams:
        return _build_params(iforest.IForestParams, self.iforest, self.seed, "iforest")

    def ocsvm_params(self) -> ocsvm.OcSvmParams:
        return _build_params(ocsvm.OcSvmParams, self.ocsvm, self.seed, "ocsvm")

    def with_overrides(self, **changes: Any) -> RunConfig:
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes) if changes else self

    def to_dict(self) -> dict:
        source: dict[str, Any]
        if self.csv_path is not None:
            source = {"csv": {"path": self.csv_path, **self.schema.to_dict()}}
        else:
            source = {"synthetic": self.synthetic.to_dict()}
        return {
            "input": source,
            "split_ratio": self.split_ratio,
            "seed": self.seed,
            "models": self.models,
            "eval_scope": self.eval_scope,
            "iforest": self.iforest_params().to_dict(),
            "ocsvm": self.ocsvm_params().to_dict(),
            "profiling": {"repeats": self.repeats, "warmup": self.warmup},
            "output_dir": self.output_dir,
        }


def _build_params(cls, overrides: Mapping[str, Any], seed: int, name: str):
    known = {f.name for f in fields(cls)}
    unknown = set(overrides) - known
    if unknown:
        raise ConfigError(f"unknown {name} parameter(s): {', '.join(sorted(unknown))}")
    try:
        return cls(**{"seed": seed, **overrides})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {name} parameters: {exc}") from None


def _take(table: dict, key: str, kind: type | tuple[type, ...], where: str, default: Any = None) -> Any:
    if key not in table:
        return default
    value = table.pop(key)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise ConfigError(f"{where}.{key} has the wrong type: {value!r}")
    return value


def load_config(path: str | Path) -> RunConfig:
    """Read a TOML run config. Unknown keys are rejected.

    Layout::

        seed = 0
        split_ratio = 0.7
        models = "both"          # iforest | ocsvm | both
        eval_scope = "test"      # test | full
        output_dir = "runs/demo"

        [input.synthetic]        # or [input.csv] with path = "..." and schema keys
        normal_count = 2000

        [iforest]
        tree_count = 100

        [ocsvm]
        nu = 0.05

        [profiling]
        repeats = 5
        warmup = 1
    """
    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None

    doc = copy.deepcopy(doc)
    source = doc.pop("input", None)
    if not isinstance(source, dict) or len(source) != 1 or not ({"csv", "synthetic"} & set(source)):
        raise ConfigError("config needs exactly one of [input.csv] or [input.synthetic]")

    kwargs: dict[str, Any] = {}
    if "csv" in source:
        table = dict(source["csv"])
        csv_path = _take(table, "path", str, "input.csv")
        if csv_path is None:
            raise ConfigError("input.csv.path is required")
        # relative data paths are relative to the config file
        if not Path(csv_path).is_absolute():
            csv_path = str((path.parent / csv_path).resolve())
        schema = IngestSchema()
        schema_kwargs = {}
        drop = _take(table, "drop_columns", list, "input.csv")
        if drop is not None:
            schema_kwargs["drop_columns"] = tuple(str(c) for c in drop)
        for key in ("label_column", "type_column"):
            value = _take(table, key, str, "input.csv")
            if value is not None:
                schema_kwargs[key] = value
        positives = _take(table, "label_positive_values", list, "input.csv")
        if positives is not None:
            schema_kwargs["label_positive_values"] = frozenset(str(v) for v in positives)
        if table:
            raise ConfigError(f"unknown input.csv key(s): {', '.join(sorted(table))}")
        kwargs["csv_path"] = csv_path
        kwargs["schema"] = replace(schema, **schema_kwargs)
    else:
        table = dict(source["synthetic"])
        try:
            kwargs["synthetic"] = SyntheticSpec(**table)
        except TypeError as exc:
            raise ConfigError(f"input.synthetic: {exc}") from None
        except ValueError as exc:
            raise ConfigError(f"input.synthetic: {exc}") from None

    for key, kind in (("seed", int), ("split_ratio", (int, float)), ("models", str),
                      ("eval_scope", str), ("output_dir", str)):
        value = _take(doc, key, kind, "config")
        if value is not None:
            kwargs[key] = value
    for model in MODEL_NAMES:
        table = doc.pop(model, None)
        if table is not None:
            if not isinstance(table, dict):
                raise ConfigError(f"[{model}] must be a table")
            kwargs[model] = table
    prof = doc.pop("profiling", None)
    if prof is not None:
        prof = dict(prof)
        for key in ("repeats", "warmup"):
            value = _take(prof, key, int, "profiling")
            if value is not None:
                kwargs[key] = value
        if prof:
            raise ConfigError(f"unknown profiling key(s): {', '.join(sorted(prof))}")
    if doc:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(doc))}")
    return RunConfig(**kwargs)


def _stage(name: str, fn: Callable[[], Any]) -> Any:
    try:
        return fn()
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(name, exc) from exc


@dataclass(frozen=True)
class _Detector:
    fit: Callable[[np.ndarray], Any]
    predict: Callable[[Any, np.ndarray], np.ndarray]
    serialize: Callable[[Any], bytes]
    describe: Callable[[Any], dict]


def _detectors(config: RunConfig) -> dict[str, _Detector]:
    if_params = config.iforest_params()
    oc_params = config.ocsvm_params()
    return {
        "iforest": _Detector(
            fit=lambda X: iforest.fit_iforest(X, if_params),
            predict=iforest.classify,
            serialize=iforest.serialize_iforest,
            describe=lambda m: {
                **if_params.to_dict(),
                "effective_subsample_size": m.subsample_size,
                "height_limit": m.height_limit,
                "threshold": m.threshold,
            },
        ),
        "ocsvm": _Detector(
            fit=lambda X: ocsvm.fit_ocsvm(X, oc_params),
            predict=ocsvm.predict,
            serialize=ocsvm.serialize_ocsvm,
            describe=lambda m: {
                **oc_params.to_dict(),
                "resolved_gamma": m.gamma,
                "support_vectors": m.n_support,
                "rho": m.rho,
                "solver_iterations": m.info.iterations if m.info else None,
                "solver_converged": m.info.converged if m.info else None,
            },
        ),
    }


def _load(config: RunConfig) -> TelemetryFrame:
    if config.csv_path is not None:
        return load_csv(config.csv_path, config.schema)
    return generate_synthetic(config.synthetic, config.seed)


def run_pipeline(config: RunConfig) -> dict:
    """Run ingest, split, normal-only filtering, scaling, fitting, evaluation and profiling.

    The scaler is fitted on the normal training rows only. With
    ``eval_scope="test"`` models are scored on the held-out rows, with
    ``"full"`` on every row of the input.

    Raises:
        PipelineError: wrapping the first failure, tagged with its stage name.
    """
    frame = _stage("load", lambda: _load(config))
    train, test = _stage("split", lambda: split_train_test(frame, config.split_ratio, config.seed))
    train_normal = _stage("filter", lambda: filter_normal(train))
    scaler = _stage("scale", lambda: fit_minmax(train_normal))
    X_train = _stage("scale", lambda: apply_minmax(train_normal, scaler)).features
    eval_frame = _stage("scale", lambda: apply_minmax(test if config.eval_scope == "test" else frame, scaler))
    X_eval = eval_frame.features
    if X_eval.shape[0] == 0:
        raise PipelineError("split", ValueError("evaluation set is empty"))

    report: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "config": config.to_dict(),
        "data": {
            "source": "csv" if config.csv_path is not None else "synthetic",
            "rows": frame.row_count,
            "anomalies": int(frame.labels.sum()),
            "feature_names": list(frame.feature_names),
            "train_rows": train.row_count,
            "train_normal_rows": train_normal.row_count,
            "eval_scope": config.eval_scope,
            "eval_rows": eval_frame.row_count,
            "eval_anomalies": int(eval_frame.labels.sum()),
            "split": SPLIT_NOTE,
            "scaler": scaler.to_dict(),
        },
        "models": {},
        "measurements": {},
    }

    detectors = _detectors(config)
    for name in config.selected_models:
        det = detectors[name]
        logger.info("fitting %s on %d normal rows", name, X_train.shape[0])

        def execute(det=det):
            model = det.fit(X_train)
            return model, det.predict(model, X_eval)

        ram = _stage(f"fit:{name}", lambda: profiling.measure_peak_ram(execute))
        model, predicted = ram.result
        blob = _stage(f"serialize:{name}", lambda: det.serialize(model))
        timing = _stage(
            f"profile:{name}",
            lambda: profiling.time_inference(lambda X: det.predict(model, X), X_eval,
                                             repeats=config.repeats, warmup=config.warmup),
        )
        cm = evaluation.confusion(eval_frame.labels, predicted)
        metrics = evaluation.metrics_report(cm)
        report["models"][name] = {
            "params": det.describe(model),
            "confusion": cm.to_dict(),
            "metrics": metrics.to_dict(),
            "normalized_confusion": evaluation.normalized_confusion(cm).to_dict(),
            "flags": list(metrics.flags),
            "model_size_bytes": profiling.measure_model_size(blob),
        }
        report["measurements"][name] = profiling.ResourceReport(
            model_size_bytes=len(blob), peak_ram_mb=ram.peak_mb, timing=timing, ram_method=ram.method
        ).to_dict()

    if len(report["models"]) == 2:
        full = compare_models(report)
        report["comparison"] = {k: v for k, v in full.items() if k in _DETERMINISTIC}
        report["measurements"]["comparison"] = {k: v for k, v in full.items() if k not in _DETERMINISTIC}
    report["environment"] = profiling.environment_capture()
    return report


def report_body(report: Mapping[str, Any]) -> dict:
    """The deterministic part of a report: everything but measurements and environment."""
    return {k: v for k, v in report.items() if k not in ("measurements", "environment")}


# (metric, higher_is_better)
_COMPARED = (
    ("accuracy", True),
    ("precision", True),
    ("recall", True),
    ("f1", True),
    ("model_size_bytes", False),
    ("inference_ms", False),
    ("peak_ram_mb", False),
)
_DETERMINISTIC = {"accuracy", "precision", "recall", "f1", "model_size_bytes"}


def _metric_value(report: Mapping[str, Any], model: str, metric: str) -> float | None:
    block = report["models"][model]
    if metric in CLASSIFICATION_METRICS:
        return block["metrics"][metric]
    if metric == "model_size_bytes":
        return block["model_size_bytes"]
    meas = report.get("measurements", {}).get(model)
    if not meas:
        return None
    if metric == "inference_ms":
        return meas["timing"]["total_batch_ms"]
    value = meas["peak_ram_mb"]
    return value if isinstance(value, (int, float)) else None


def compare_models(report: Mapping[str, Any]) -> dict:
    """Per-metric winner between the two models of one report, with margins."""
    missing = [m for m in MODEL_NAMES if m not in report.get("models", {})]
    if missing:
        raise ValueError(f"comparison needs both models; missing {', '.join(missing)}")
    out = {}
    for metric, higher_better in _COMPARED:
        a = _metric_value(report, "iforest", metric)
        b = _metric_value(report, "ocsvm", metric)
        if a is None or b is None:
            out[metric] = {"iforest": a, "ocsvm": b, "winner": "unavailable", "margin": None}
            continue
        if a == b:
            winner = "tie"
        elif (a > b) == higher_better:
            winner = "iforest"
        else:
            winner = "ocsvm"
        out[metric] = {
            "iforest": a,
            "ocsvm": b,
            "winner": winner,
            "margin": abs(a - b),
            "higher_is_better": higher_better,
        }
    return out


def compare_reports(first: Mapping[str, Any], second: Mapping[str, Any]) -> dict:
    """Change in each metric from ``first`` to ``second`` for models present in both."""
    out: dict[str, Any] = {}
    for model in MODEL_NAMES:
        if model not in first.get("models", {}) or model not in second.get("models", {}):
            continue
        out[model] = {}
        for metric, _ in _COMPARED:
            a = _metric_value(first, model, metric)
            b = _metric_value(second, model, metric)
            out[model][metric] = {
                "first": a,
                "second": b,
                "delta": None if a is None or b is None else b - a,
            }
    if not out:
        raise ValueError("the two reports share no model")
    return out


def table_rows(report: Mapping[str, Any]) -> list[dict]:
    """One row per model in ``TABLE_HEADER`` order, read straight from the report."""
    rows = []
    for model in MODEL_NAMES:
        if model not in report["models"]:
            continue
        row = {"model": model}
        for metric in TABLE_HEADER[1:]:
            value = _metric_value(report, model, metric)
            row[metric] = "unsupported" if value is None else value
        rows.append(row)
    return rows


def emit_report(report: Mapping[str, Any], fmt: str, path: str | Path) -> Path:
    """Write the report as JSON, or as a flat per-model CSV table."""
    path = Path(path)
    if fmt not in ("json", "csv"):
        raise ValueError(f"format must be json or csv, got {fmt!r}")
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
        return path
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=TABLE_HEADER)
        writer.writeheader()
        for row in table_rows(report):
            writer.writerow({k: _fmt(v) for k, v in row.items()})
    return path


def _fmt(value: Any) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def emit_plot_data(report: Mapping[str, Any], outdir: str | Path) -> list[Path]:
    """Grouped-bar data: ``metrics_bars.csv`` plus one CSV per resource metric."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = table_rows(report)
    if not rows:
        raise ValueError("report has no models")
    written = []

    path = outdir / "metrics_bars.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "model", "value"])
        for metric in CLASSIFICATION_METRICS:
            for row in rows:
                writer.writerow([metric, row["model"], _fmt(row[metric])])
    written.append(path)

    for filename, metric in (
        ("inference_bars.csv", "inference_ms"),
        ("size_bars.csv", "model_size_bytes"),
        ("ram_bars.csv", "peak_ram_mb"),
    ):
        path = outdir / filename
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["model", metric])
            for row in rows:
                writer.writerow([row["model"], _fmt(row[metric])])
        written.append(path)
    return written
