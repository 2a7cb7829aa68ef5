# coding: utf-8

# # Isolation Forest on synthetic telemetry
#
# Normal readings form a tight Gaussian cluster. Anomalies are drawn from a
# wide box and kept only when they land well outside the cluster, so the two
# classes are separable by construction.

# In[1]:

import numpy as np

from iotad import IForestParams, SyntheticSpec, fit_iforest, generate_synthetic
from iotad.dataset import apply_minmax, filter_normal, fit_minmax, split_train_test
from iotad.iforest import classify, expected_path_c, score_samples, tree_height

frame = generate_synthetic(SyntheticSpec(normal_count=2000, anomaly_count=200, dimension=4), seed=0)
train, test = split_train_test(frame, 0.7, seed=0)
train = filter_normal(train)
scaler = fit_minmax(train)
X_train = apply_minmax(train, scaler).features
test = apply_minmax(test, scaler)
print(X_train.shape, test.row_count, int(test.labels.sum()))


# # The normalizer c(n)
#
# A random binary search tree over n points has average unsuccessful-search
# depth c(n). Scores divide the mean path length by c(psi).

# In[2]:

for n in (2, 16, 256, 4096):
    print(n, round(expected_path_c(n), 4))


# # Fitting
#
# 100 trees, each grown on 256 rows and capped at depth ceil(log2 256) = 8.
# The threshold is the 90th percentile of training scores.

# In[3]:

model = fit_iforest(X_train, IForestParams(seed=0))
print(len(model.trees), model.subsample_size, max(tree_height(t) for t in model.trees))
print("threshold", round(model.threshold, 4))


# Anomalies isolate in fewer splits, so their scores sit higher.

# In[4]:

s = score_samples(model, test.features)
print("normal  mean score", s[test.labels == 0].mean().round(3))
print("anomaly mean score", s[test.labels == 1].mean().round(3))

flags = classify(model, test.features)
print("anomalies flagged", int(flags[test.labels == 1].sum()), "of", int(test.labels.sum()))
print("normals flagged  ", int(flags[test.labels == 0].sum()), "of", int((test.labels == 0).sum()))

# The second line is the price of a quantile threshold: roughly a tenth of
# normal traffic is over it by definition. Lower `contamination` if false
# alarms matter more than misses.

# In[5]:

quiet = fit_iforest(X_train, IForestParams(contamination=0.01, seed=0))
flags = classify(quiet, test.features)
print("anomalies flagged", int(flags[test.labels == 1].sum()), "normals flagged", int(flags[test.labels == 0].sum()))
