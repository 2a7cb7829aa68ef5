"""nu one-class SVM with an RBF kernel, solved by pairwise (SMO) updates.

The dual problem is::

    minimize    1/2 * sum_ij a_i a_j k(x_i, x_j)
    subject to  0 <= a_i <= 1 / (nu * n),   sum_i a_i = 1

and the decision function is ``f(x) = sum_i a_i k(x_i, x) - rho`` with
``f >= 0`` inside the learned boundary. :func:`brute_force_dual` solves the
same problem by grid enumeration for tiny instances and serves as an
independent check on the solver.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from iotad._codec import Reader, Writer
from iotad.errors import DataError, ModelFormatError

__all__ = [
    "OcSvmParams",
    "OcSvmModel",
    "SolverInfo",
    "rbf_kernel",
    "rbf_matrix",
    "resolve_gamma",
    "dual_objective",
    "kkt_residuals",
    "fit_ocsvm",
    "brute_force_dual",
    "decision_value",
    "decision_function",
    "predict",
    "serialize_ocsvm",
    "deserialize_ocsvm",
]

logger = logging.getLogger(__name__)

MAGIC = b"OSv1"
FULL_KERNEL_LIMIT = 4096
_CHUNK_ROWS = 4096


def rbf_kernel(x: np.ndarray, y: np.ndarray, gamma: float) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DataError(f"dimension mismatch: {x.shape} vs {y.shape}")
    diff = x - y
    return float(math.exp(-gamma * float(diff @ diff)))


def rbf_matrix(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    """Kernel matrix ``K[i, j] = exp(-gamma * ||A_i - B_j||^2)``."""
    sq = (
        np.einsum("ij,ij->i", A, A)[:, None]
        + np.einsum("ij,ij->i", B, B)[None, :]
        - 2.0 * (A @ B.T)
    )
    np.maximum(sq, 0.0, out=sq)
    sq *= -gamma
    return np.exp(sq, out=sq)


def resolve_gamma(X: np.ndarray, gamma: float | str) -> float:
    """``"scale"`` resolves to ``1 / (d * mean per-feature variance)``."""
    if gamma == "scale":
        spread = float(X.var(axis=0).mean())
        return 1.0 / (X.shape[1] * spread) if spread > 0 else 1.0
    gamma = float(gamma)
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return gamma


@dataclass(frozen=True)
class OcSvmParams:
    nu: float = 0.05
    gamma: float | str = "scale"
    tolerance: float = 1e-3
    max_passes: int | None = None  # None -> 10 * n pair updates
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.nu <= 1.0:
            raise ValueError(f"nu must lie in (0, 1], got {self.nu}")
        if isinstance(self.gamma, str):
            if self.gamma != "scale":
                raise ValueError(f"gamma must be positive or 'scale', got {self.gamma!r}")
        elif not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_passes is not None and self.max_passes < 1:
            raise ValueError(f"max_passes must be positive, got {self.max_passes}")

    def to_dict(self) -> dict:
        return {
            "nu": self.nu,
            "gamma": self.gamma,
            "tolerance": self.tolerance,
            "max_passes": self.max_passes,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class SolverInfo:
    """Solver state at exit. Not serialized."""

    alphas: np.ndarray
    gradient: np.ndarray
    iterations: int
    converged: bool
    max_violation: float


@dataclass(frozen=True)
class OcSvmModel:
    support_vectors: np.ndarray
    alphas: np.ndarray
    rho: float
    gamma: float
    n_train: int
    params: OcSvmParams
    support_indices: np.ndarray | None = field(default=None, compare=False, repr=False)
    info: SolverInfo | None = field(default=None, compare=False, repr=False)

    @property
    def n_support(self) -> int:
        return int(self.alphas.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.support_vectors.shape[1])

    @property
    def upper_bound(self) -> float:
        return 1.0 / (self.params.nu * self.n_train)


class _KernelRows:
    """Kernel columns on demand: a precomputed matrix for small n, an LRU cache otherwise."""

    def __init__(self, X: np.ndarray, gamma: float, cache_rows: int = 1024) -> None:
        self._X = X
        self._gamma = gamma
        n = X.shape[0]
        self._full = rbf_matrix(X, X, gamma) if n <= FULL_KERNEL_LIMIT else None
        self._row = lru_cache(maxsize=cache_rows)(self._compute_row)

    def _compute_row(self, i: int) -> np.ndarray:
        return rbf_matrix(self._X, self._X[i : i + 1], self._gamma)[:, 0]

    def __getitem__(self, i: int) -> np.ndarray:
        if self._full is not None:
            return self._full[:, i]
        return self._row(i)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        if self._full is not None:
            return self._full @ v
        nz = np.flatnonzero(v)
        out = np.zeros(self._X.shape[0])
        for start in range(0, nz.size, _CHUNK_ROWS):
            cols = nz[start : start + _CHUNK_ROWS]
            out += rbf_matrix(self._X, self._X[cols], self._gamma) @ v[cols]
        return out


def dual_objective(alphas: np.ndarray, K: np.ndarray) -> float:
    alphas = np.asarray(alphas, dtype=np.float64)
    return float(0.5 * alphas @ K @ alphas)


def _initial_alphas(n: int, upper: float) -> np.ndarray:
    alphas = np.zeros(n)
    full = min(n, int(math.floor(1.0 / upper + 1e-9)))
    alphas[:full] = upper
    if full < n:
        alphas[full] = min(upper, max(0.0, 1.0 - full * upper))
    return alphas


def fit_ocsvm(train: np.ndarray, params: OcSvmParams | None = None) -> OcSvmModel:
    """Solve the nu one-class dual by maximal-violating-pair SMO.

    Each step picks ``i = argmin G`` over points that can grow and
    ``j = argmax G`` over points that can shrink (``G`` is the gradient,
    ties go to the lowest index), then moves mass from ``j`` to ``i`` by the
    exact clipped line minimum. Stops when ``G[j] - G[i] <= tolerance`` or
    after ``max_passes`` updates.

    Raises:
        DataError: fewer than 2 rows, non-finite values, or ``nu * n < 1``.
    """
    params = params or OcSvmParams()
    X = np.ascontiguousarray(train, dtype=np.float64)
    if X.ndim != 2:
        raise DataError(f"training data must be 2-D, got shape {X.shape}")
    n = X.shape[0]
    if n < 2:
        raise DataError(f"need at least 2 training rows, got {n}")
    if not np.all(np.isfinite(X)):
        raise DataError("training data contains NaN or infinite values")
    if params.nu * n < 1.0 - 1e-12:
        raise DataError(f"nu * n = {params.nu * n:.6g} < 1: the box bound 1/(nu n) makes sum(alpha) = 1 infeasible")

    gamma = resolve_gamma(X, params.gamma)
    upper = 1.0 / (params.nu * n)
    max_iter = params.max_passes if params.max_passes is not None else 10 * n
    K = _KernelRows(X, gamma)

    alphas = _initial_alphas(n, upper)
    G = K.matvec(alphas)
    converged = False
    violation = math.inf
    iterations = 0
    while True:
        can_grow = alphas < upper
        can_shrink = alphas > 0.0
        i = int(np.argmin(np.where(can_grow, G, np.inf)))
        j = int(np.argmax(np.where(can_shrink, G, -np.inf)))
        violation = float(G[j] - G[i]) if can_grow.any() else 0.0
        if violation <= params.tolerance:
            converged = True
            break
        if iterations >= max_iter:
            break
        Ki = K[i]
        Kj = K[j]
        curvature = Ki[i] + Kj[j] - 2.0 * Ki[j]
        if curvature <= 0.0:
            curvature = 1e-12
        room_i = upper - alphas[i]
        room_j = alphas[j]
        step = (G[j] - G[i]) / curvature
        if step >= room_i and room_i <= room_j:
            step = room_i
            alphas[i] = upper
            alphas[j] -= step
        elif step >= room_j:
            step = room_j
            alphas[i] += step
            alphas[j] = 0.0
        else:
            alphas[i] += step
            alphas[j] -= step
        G += step * (Ki - Kj)
        iterations += 1

    if not converged:
        logger.warning(
            "one-class SVM stopped after %d updates with KKT violation %.3g > %.3g",
            iterations, violation, params.tolerance,
        )

    G = K.matvec(alphas)
    rho = _offset(alphas, G, upper)
    support = np.flatnonzero(alphas > 0.0)
    info = SolverInfo(alphas.copy(), G, iterations, converged, violation)
    return OcSvmModel(
        support_vectors=X[support].copy(),
        alphas=alphas[support].copy(),
        rho=rho,
        gamma=gamma,
        n_train=n,
        params=params,
        support_indices=support,
        info=info,
    )


def _offset(alphas: np.ndarray, G: np.ndarray, upper: float) -> float:
    free = (alphas > 0.0) & (alphas < upper)
    if free.any():
        return float(G[free].mean())
    at_zero = alphas <= 0.0
    at_upper = alphas >= upper
    if not at_zero.any():
        return float(G[at_upper].max())
    return float(0.5 * (G[at_zero].min() + G[at_upper].max()))


def kkt_residuals(alphas: np.ndarray, decision: np.ndarray, upper: float) -> np.ndarray:
    """Per-point KKT violation for training decision values ``decision``.

    Points at zero need ``f >= 0``, points at the upper bound need ``f <= 0``
    and free points need ``f == 0``.
    """
    alphas = np.asarray(alphas, dtype=np.float64)
    f = np.asarray(decision, dtype=np.float64)
    at_zero = alphas <= 0.0
    at_upper = alphas >= upper
    free = ~(at_zero | at_upper)
    res = np.zeros_like(f)
    res[at_zero] = np.maximum(0.0, -f[at_zero])
    res[at_upper] = np.maximum(0.0, f[at_upper])
    res[free] = np.abs(f[free])
    return res


def _project_capped_simplex(V: np.ndarray, upper: float) -> np.ndarray:
    """Row-wise Euclidean projection onto ``{0 <= a <= upper, sum a = 1}``.

    Bisects on the per-row shift ``t`` in ``clip(v - t, 0, upper)``.
    """
    V = np.atleast_2d(V)
    lo = V.min(axis=1, keepdims=True) - upper
    hi = V.max(axis=1, keepdims=True)
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        over = np.clip(V - mid, 0.0, upper).sum(axis=1, keepdims=True) > 1.0
        lo = np.where(over, mid, lo)
        hi = np.where(over, hi, mid)
    return np.clip(V - 0.5 * (lo + hi), 0.0, upper)


def brute_force_dual(
    train: np.ndarray, params: OcSvmParams | None = None, grid_steps: int = 20
) -> np.ndarray:
    """Reference minimizer of the dual for n <= 6.

    Enumerates every point ``k / grid_steps`` on the probability simplex,
    projects it onto the box-capped simplex, keeps the best, then polishes it
    with cyclic exact line searches over all coordinate pairs until no pair
    moves by more than 1e-12. Kernel values come from :func:`rbf_kernel`
    directly, not from the solver's matrix code.
    """
    params = params or OcSvmParams()
    X = np.asarray(train, dtype=np.float64)
    n = X.shape[0]
    if n > 6:
        raise DataError(f"brute_force_dual is limited to n <= 6, got {n}")
    if n < 1 or params.nu * n < 1.0 - 1e-12:
        raise DataError("infeasible instance for brute_force_dual")
    gamma = resolve_gamma(X, params.gamma)
    upper = 1.0 / (params.nu * n)
    K = np.array([[rbf_kernel(X[a], X[b], gamma) for b in range(n)] for a in range(n)])

    # stars and bars: every composition of grid_steps into n parts
    grid = []
    for bars in itertools.combinations(range(grid_steps + n - 1), n - 1):
        edges = (-1, *bars, grid_steps + n - 1)
        grid.append([edges[k + 1] - edges[k] - 1 for k in range(n)])
    candidates = np.array(grid, dtype=np.float64) / grid_steps
    candidates = _project_capped_simplex(candidates, upper)
    objectives = 0.5 * np.einsum("gi,ij,gj->g", candidates, K, candidates)
    best = candidates[int(np.argmin(objectives))].copy()

    for _ in range(100_000):
        biggest = 0.0
        for a, b in itertools.combinations(range(n), 2):
            curvature = K[a, a] + K[b, b] - 2.0 * K[a, b]
            if curvature <= 1e-15:
                continue
            grad = K @ best
            t = -(grad[a] - grad[b]) / curvature
            t = min(max(t, max(-best[a], best[b] - upper)), min(upper - best[a], best[b]))
            best[a] += t
            best[b] -= t
            biggest = max(biggest, abs(t))
        if biggest < 1e-12:
            break
    return best


def _check_rows(model: OcSvmModel, X: np.ndarray) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DataError(f"expected a matrix with {model.n_features} columns, got shape {X.shape}")
    return X


def decision_function(model: OcSvmModel, X: np.ndarray) -> np.ndarray:
    """``f(x)`` for every row; negative means outside the boundary."""
    X = _check_rows(model, X)
    out = np.empty(X.shape[0])
    for start in range(0, X.shape[0], _CHUNK_ROWS):
        block = X[start : start + _CHUNK_ROWS]
        out[start : start + block.shape[0]] = (
            rbf_matrix(block, model.support_vectors, model.gamma) @ model.alphas - model.rho
        )
    return out


def decision_value(model: OcSvmModel, point: np.ndarray) -> float:
    point = np.asarray(point, dtype=np.float64)
    if point.ndim != 1:
        raise DataError(f"point must be 1-D, got shape {point.shape}")
    return float(decision_function(model, point[None, :])[0])


def predict(model: OcSvmModel, X: np.ndarray) -> np.ndarray:
    return (decision_function(model, X) < 0.0).astype(np.int8)


def serialize_ocsvm(model: OcSvmModel) -> bytes:
    """Encode as ``OSv1``: params, resolved gamma, sizes, support vectors, alphas, rho."""
    p = model.params
    w = Writer(MAGIC)
    w.f64(p.nu)
    if p.gamma == "scale":
        w.u8(0)
        w.f64(0.0)
    else:
        w.u8(1)
        w.f64(float(p.gamma))
    w.f64(p.tolerance)
    w.i64(-1 if p.max_passes is None else p.max_passes)
    w.i64(p.seed)
    w.f64(model.gamma)
    w.u32(model.n_train)
    w.u32(model.n_support)
    w.u32(model.n_features)
    w.f64_array(model.support_vectors)
    w.f64_array(model.alphas)
    w.f64(model.rho)
    return w.getvalue()


def deserialize_ocsvm(data: bytes) -> OcSvmModel:
    r = Reader(data, MAGIC)
    nu = r.f64()
    gamma_kind = r.u8()
    gamma_value = r.f64()
    tolerance = r.f64()
    max_passes = r.i64()
    seed = r.i64()
    if gamma_kind not in (0, 1):
        raise ModelFormatError(f"unknown gamma encoding {gamma_kind}")
    try:
        params = OcSvmParams(
            nu=nu,
            gamma="scale" if gamma_kind == 0 else gamma_value,
            tolerance=tolerance,
            max_passes=None if max_passes == -1 else max_passes,
            seed=seed,
        )
    except ValueError as exc:
        raise ModelFormatError(f"invalid one-class SVM parameters: {exc}") from None
    gamma = r.f64()
    n_train = r.u32()
    m = r.u32()
    d = r.u32()
    if d < 1 or m < 1 or m > n_train:
        raise ModelFormatError("inconsistent one-class SVM header")
    support_vectors = r.f64_array(m * d).reshape(m, d)
    alphas = r.f64_array(m)
    rho = r.f64()
    r.finish()
    return OcSvmModel(support_vectors, alphas, rho, gamma, n_train, params)
