# coding: utf-8

# # Metrics and resource measurements

# In[1]:

from iotad.evaluation import ConfusionMatrix, f1, metrics_report, normalized_confusion

cm = ConfusionMatrix(tp=8, tn=88, fp=2, fn=2)
report = metrics_report(cm)
print(report.accuracy, report.precision, report.recall, report.f1)

# Precision/recall pairs of 84/86 and 72/76 give these harmonic means.

print(f1(84.0, 86.0), f1(72.0, 76.0))

# A detector that flags nothing still gets a report, with a flag saying why
# precision is zero.

print(metrics_report(ConfusionMatrix(tp=0, tn=90, fp=0, fn=10)).flags)
print(normalized_confusion(ConfusionMatrix(tp=93, tn=95, fp=5, fn=7)))


# # Timing, size, peak RAM
#
# Timings are medians over repeats, single-threaded. Peak RAM is the process
# high-water mark, so it includes the interpreter and numpy.

# In[2]:

import numpy as np

from iotad import IForestParams, OcSvmParams, fit_iforest, fit_ocsvm
from iotad.iforest import classify, serialize_iforest
from iotad.ocsvm import predict, serialize_ocsvm
from iotad.profiling import measure_model_size, measure_peak_ram, time_inference

rng = np.random.default_rng(0)
X_train = rng.normal(0.5, 0.1, size=(3000, 4))
batch = rng.normal(0.5, 0.15, size=(10_000, 4))

forest = fit_iforest(X_train, IForestParams(seed=0))
svm = fit_ocsvm(X_train, OcSvmParams(nu=0.2))

for name, model, run, dump in (("iforest", forest, classify, serialize_iforest),
                               ("ocsvm", svm, predict, serialize_ocsvm)):
    t = time_inference(lambda X: run(model, X), batch)
    ram = measure_peak_ram(lambda: run(model, batch))
    print(f"{name:8s} {t.total_batch_ms:8.1f} ms  {measure_model_size(dump(model)):8d} B  {ram.peak_mb} MB")
