# coding: utf-8

# # One-class SVM trained on normal rows only

# In[1]:

import numpy as np

from iotad import OcSvmParams, SyntheticSpec, fit_ocsvm, generate_synthetic
from iotad.dataset import apply_minmax, filter_normal, fit_minmax, split_train_test
from iotad.ocsvm import brute_force_dual, decision_function, dual_objective, kkt_residuals, predict, rbf_matrix

frame = generate_synthetic(SyntheticSpec(normal_count=2000, anomaly_count=200, dimension=4), seed=0)
train, test = split_train_test(frame, 0.7, seed=0)
train = filter_normal(train)
scaler = fit_minmax(train)
X_train = apply_minmax(train, scaler).features
test = apply_minmax(test, scaler)


# # Solving the dual
#
# nu bounds the fraction of training points left outside the boundary from
# above and the fraction kept as support vectors from below.

# In[2]:

model = fit_ocsvm(X_train, OcSvmParams(nu=0.05))
info = model.info
print("rows", model.n_train, "support vectors", model.n_support)
print("iterations", info.iterations, "converged", info.converged)
print("gamma", round(model.gamma, 3), "rho", round(model.rho, 4))

f = decision_function(model, X_train)
print("worst KKT residual", kkt_residuals(info.alphas, f, model.upper_bound).max())
print("training rows outside", np.mean(f < 0).round(4))


# # Checking against brute force
#
# For a handful of points the dual can be searched directly.

# In[3]:

rng = np.random.default_rng(3)
X = rng.random((5, 2))
params = OcSvmParams(nu=0.5, tolerance=1e-9, max_passes=100_000)
small = fit_ocsvm(X, params)
K = rbf_matrix(X, X, small.gamma)
print(dual_objective(small.info.alphas, K), dual_objective(brute_force_dual(X, params), K))


# # Detection

# In[4]:

flags = predict(model, test.features)
print("anomalies flagged", int(flags[test.labels == 1].sum()), "of", int(test.labels.sum()))
print("normals flagged  ", int(flags[test.labels == 0].sum()), "of", int((test.labels == 0).sum()))
