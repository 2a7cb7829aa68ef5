from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from iotad.cli import main
from iotad.dataset import SyntheticSpec, TelemetryFrame, generate_synthetic, split_train_test, write_csv
from iotad.errors import ConfigError, PipelineError
from iotad.pipeline import (
    TABLE_HEADER,
    RunConfig,
    compare_models,
    compare_reports,
    emit_plot_data,
    emit_report,
    load_config,
    report_body,
    run_pipeline,
)

SMALL = SyntheticSpec(normal_count=300, anomaly_count=30, dimension=3)


def small_config(**kw) -> RunConfig:
    base = dict(synthetic=SMALL, seed=4, repeats=3, iforest={"tree_count": 30}, ocsvm={"nu": 0.1})
    base.update(kw)
    return RunConfig(**base)


@pytest.fixture(scope="module")
def report():
    return run_pipeline(small_config())


def fake_report(if_metrics, oc_metrics, if_ms=1.0, oc_ms=2.0):
    def block(vals, ms):
        acc, prec, rec, f = vals
        return {"metrics": {"accuracy": acc, "precision": prec, "recall": rec, "f1": f}, "model_size_bytes": 10}

    return {
        "models": {"iforest": block(if_metrics, if_ms), "ocsvm": block(oc_metrics, oc_ms)},
        "measurements": {
            "iforest": {"timing": {"total_batch_ms": if_ms}, "peak_ram_mb": 100.0},
            "ocsvm": {"timing": {"total_batch_ms": oc_ms}, "peak_ram_mb": 200.0},
        },
    }


class TestRun:
    def test_both_models(self, report):
        assert set(report["models"]) == {"iforest", "ocsvm"}
        assert set(report["measurements"]) == {"iforest", "ocsvm", "comparison"}
        for name in ("iforest", "ocsvm"):
            assert report["models"][name]["model_size_bytes"] > 0
            assert report["measurements"][name]["timing"]["repeats"] == 3

    def test_single_model(self):
        rep = run_pipeline(small_config(models="iforest"))
        assert list(rep["models"]) == ["iforest"]
        assert "comparison" not in rep

    def test_body_deterministic(self, report):
        again = run_pipeline(small_config())
        a = json.dumps(report_body(report), sort_keys=True)
        b = json.dumps(report_body(again), sort_keys=True)
        assert a == b

    def test_config_defaults_materialized(self, report):
        cfg = report["config"]
        assert cfg["iforest"]["subsample_size"] == 256
        assert cfg["ocsvm"]["gamma"] == "scale"
        assert cfg["eval_scope"] == "test"

    def test_eval_scope_full(self):
        rep = run_pipeline(small_config(eval_scope="full", models="iforest"))
        assert rep["data"]["eval_rows"] == SMALL.normal_count + SMALL.anomaly_count

    def test_stage_error_tagged(self):
        cfg = small_config(synthetic=SyntheticSpec(normal_count=2, anomaly_count=0, dimension=2),
                           ocsvm={"nu": 0.05}, models="ocsvm")
        with pytest.raises(PipelineError) as info:
            run_pipeline(cfg)
        assert info.value.stage == "fit:ocsvm"

    def test_scaler_ignores_test_rows(self, tmp_path):
        frame = generate_synthetic(SMALL, 0)
        ids = TelemetryFrame(("i",), np.arange(frame.row_count, dtype=float)[:, None], frame.labels)
        _, test_ids = split_train_test(ids, 0.7, 4)
        victim = int(test_ids.features[0, 0])

        write_csv(frame, tmp_path / "a.csv")
        poisoned = frame.features.copy()
        poisoned[victim] = 1e9
        write_csv(frame.with_features(poisoned), tmp_path / "b.csv")
        a = run_pipeline(small_config(synthetic=None, csv_path=str(tmp_path / "a.csv"), models="iforest"))
        b = run_pipeline(small_config(synthetic=None, csv_path=str(tmp_path / "b.csv"), models="iforest"))
        assert a["data"]["scaler"] == b["data"]["scaler"]


class TestEmit:
    def test_json_round_trip(self, report, tmp_path):
        path = emit_report(report, "json", tmp_path / "r.json")
        assert json.loads(path.read_text()) == json.loads(json.dumps(report))

    def test_csv_header(self, report, tmp_path):
        path = emit_report(report, "csv", tmp_path / "r.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(TABLE_HEADER)
        assert len(lines) == 3

    def test_csv_values_trace_to_report(self, report, tmp_path):
        path = emit_report(report, "csv", tmp_path / "r.csv")
        with path.open() as fh:
            for row in csv.DictReader(fh):
                m = row["model"]
                assert float(row["f1"]) == report["models"][m]["metrics"]["f1"]
                assert float(row["inference_ms"]) == report["measurements"][m]["timing"]["total_batch_ms"]

    def test_flags_pass_through(self, tmp_path):
        cfg = small_config(models="iforest", iforest={"tree_count": 30, "contamination": 0.0},
                           synthetic=SyntheticSpec(normal_count=300, anomaly_count=0, dimension=3))
        rep = run_pipeline(cfg)
        assert "no actual positives" in rep["models"]["iforest"]["flags"]
        text = emit_report(rep, "json", tmp_path / "r.json").read_text()
        assert "no actual positives" in text

    def test_bad_format(self, report, tmp_path):
        with pytest.raises(ValueError):
            emit_report(report, "xml", tmp_path / "r.xml")

    def test_plot_data_two_models(self, report, tmp_path):
        paths = emit_plot_data(report, tmp_path)
        assert {p.name for p in paths} == {"metrics_bars.csv", "inference_bars.csv", "size_bars.csv", "ram_bars.csv"}
        with (tmp_path / "metrics_bars.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 8
        for row in rows:
            assert float(row["value"]) == report["models"][row["model"]]["metrics"][row["metric"]]
        with (tmp_path / "size_bars.csv").open() as fh:
            for row in csv.DictReader(fh):
                assert int(row["model_size_bytes"]) == report["models"][row["model"]]["model_size_bytes"]

    def test_plot_data_one_model(self, tmp_path):
        rep = run_pipeline(small_config(models="ocsvm"))
        emit_plot_data(rep, tmp_path)
        assert len((tmp_path / "metrics_bars.csv").read_text().splitlines()) == 1 + 4


class TestCompare:
    def test_if_ahead_on_all_four(self):
        out = compare_models(fake_report((89, 84, 86, 85), (81, 72, 76, 74)))
        for metric in ("accuracy", "precision", "recall", "f1"):
            assert out[metric]["winner"] == "iforest"
        assert out["f1"]["margin"] == 11

    def test_tie(self):
        out = compare_models(fake_report((80, 70, 75, 72), (81, 72, 76, 72)))
        assert out["f1"]["winner"] == "tie"

    def test_follows_data(self):
        out = compare_models(fake_report((80, 70, 75, 72), (81, 72, 76, 74), if_ms=9.0, oc_ms=3.0))
        assert out["inference_ms"]["winner"] == "ocsvm"
        assert out["f1"]["winner"] == "ocsvm"
        assert out["peak_ram_mb"]["winner"] == "iforest"

    def test_single_model(self):
        rep = fake_report((1, 1, 1, 1), (1, 1, 1, 1))
        del rep["models"]["ocsvm"]
        with pytest.raises(ValueError):
            compare_models(rep)

    def test_compare_reports_delta(self):
        a = fake_report((80, 70, 75, 72), (81, 72, 76, 74))
        b = fake_report((82, 70, 75, 72), (81, 72, 76, 74))
        out = compare_reports(a, b)
        assert out["iforest"]["accuracy"]["delta"] == 2
        assert out["ocsvm"]["f1"]["delta"] == 0


class TestConfig:
    def test_load_synthetic(self, tmp_path):
        path = tmp_path / "c.toml"
        path.write_text('seed = 3\nmodels = "iforest"\n[input.synthetic]\nnormal_count = 50\n'
                        "anomaly_count = 5\n[iforest]\ntree_count = 10\n[profiling]\nrepeats = 4\n")
        cfg = load_config(path)
        assert cfg.seed == 3 and cfg.repeats == 4
        assert cfg.iforest_params().tree_count == 10 and cfg.iforest_params().seed == 3

    def test_relative_csv_path(self, tmp_path):
        path = tmp_path / "c.toml"
        path.write_text('[input.csv]\npath = "data.csv"\n')
        assert load_config(path).csv_path == str(tmp_path / "data.csv")

    @pytest.mark.parametrize("text", [
        "seed = 1\n",
        '[input.synthetic]\n[input.csv]\npath = "x"\n',
        "bogus = 1\n[input.synthetic]\n",
        "[input.synthetic]\n[iforest]\ntrees = 3\n",
        "[input.synthetic]\n[ocsvm]\nnu = 2.0\n",
        'models = "svm"\n[input.synthetic]\n',
        "seed = \n",
    ])
    def test_errors(self, tmp_path, text):
        path = tmp_path / "c.toml"
        path.write_text(text)
        with pytest.raises(ConfigError):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "none.toml")


class TestCli:
    def test_synth_run_report_compare(self, tmp_path, capsys):
        data = tmp_path / "d.csv"
        assert main(["synth", "--out", str(data), "--normal", "200", "--anomalies", "20", "--dim", "3"]) == 0
        cfg = tmp_path / "c.toml"
        cfg.write_text('[input.csv]\npath = "d.csv"\n[iforest]\ntree_count = 20\n[ocsvm]\nnu = 0.1\n'
                       "[profiling]\nrepeats = 3\n")
        out = tmp_path / "run"
        assert main(["run", "--config", str(cfg), "--out", str(out), "--seed", "2"]) == 0
        for name in ("report.json", "report.csv", "metrics_bars.csv", "ram_bars.csv"):
            assert (out / name).exists()
        assert main(["report", str(out / "report.json"), "--format", "csv", "--out", str(tmp_path / "t.csv")]) == 0
        assert (tmp_path / "t.csv").read_text().splitlines()[0] == ",".join(TABLE_HEADER)
        assert main(["compare", str(out / "report.json"), str(out / "report.json")]) == 0
        printed = capsys.readouterr().out
        assert '"delta": 0.0' in printed or '"delta": 0' in printed

    def test_config_error_exit(self, tmp_path):
        cfg = tmp_path / "c.toml"
        cfg.write_text("nonsense = 1\n")
        assert main(["run", "--config", str(cfg)]) == 2

    def test_usage_error_exit(self):
        with pytest.raises(SystemExit) as info:
            main(["run", "--model", "svm"])
        assert info.value.code == 2

    def test_data_error_exit(self, tmp_path):
        cfg = tmp_path / "c.toml"
        cfg.write_text('[input.csv]\npath = "missing.csv"\n')
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3

    def test_bad_report_file(self, tmp_path):
        bad = tmp_path / "r.json"
        bad.write_text("{not json")
        assert main(["report", str(bad)]) == 3
