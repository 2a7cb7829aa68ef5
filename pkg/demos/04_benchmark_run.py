# coding: utf-8

# # Full benchmark run
#
# `run_pipeline` does everything the `iotad run` command does except
# writing files. Pass a CSV path instead of a synthetic spec to use real
# telemetry, e.g. the TON_IoT thermostat file.

# In[1]:

import json
import tempfile
from pathlib import Path

from iotad import RunConfig, SyntheticSpec
from iotad.pipeline import compare_models, emit_plot_data, emit_report, report_body, run_pipeline

config = RunConfig(synthetic=SyntheticSpec(normal_count=2000, anomaly_count=200, dimension=4), seed=0)
report = run_pipeline(config)

for name, block in report["models"].items():
    m = block["metrics"]
    print(f"{name:8s} acc {m['accuracy']:6.2f}  P {m['precision']:6.2f}  R {m['recall']:6.2f}  F1 {m['f1']:6.2f}")


# # Who wins what
#
# The comparison follows the numbers. Nothing is assumed about which model
# should come out ahead.

# In[2]:

for metric, row in compare_models(report).items():
    print(f"{metric:18s} {row['winner']}")


# # Output files

# In[3]:

out = Path(tempfile.mkdtemp())
emit_report(report, "json", out / "report.json")
emit_report(report, "csv", out / "report.csv")
emit_plot_data(report, out)
print(sorted(p.name for p in out.iterdir()))
print((out / "report.csv").read_text())

# Timings and RAM live under "measurements"; everything else repeats
# exactly for the same config.

again = run_pipeline(config)
print(json.dumps(report_body(report), sort_keys=True) == json.dumps(report_body(again), sort_keys=True))
