"""Isolation Forest built from scratch.

Each tree is grown on a random subsample by repeatedly cutting a randomly
chosen feature at a random value between its observed extremes. Points that
are isolated after few cuts are anomalous. A point's anomaly score is
``2 ** (-mean_path / c(psi))`` where ``c`` is the expected path length of an
unsuccessful search in a random binary search tree.

Trees are kept as nested :class:`InternalNode` / :class:`ExternalNode`
objects for inspection and serialization, and compiled into flat arrays for
batch scoring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numba
import numpy as np

from iotad._codec import Reader, Writer
from iotad.errors import DataError, ModelFormatError

__all__ = [
    "EULER_GAMMA",
    "ExternalNode",
    "InternalNode",
    "IForestParams",
    "IsolationForestModel",
    "expected_path_c",
    "build_tree",
    "path_length",
    "tree_height",
    "leaf_sizes",
    "score_from_mean_path",
    "mean_path_lengths",
    "score_samples",
    "score",
    "fit_iforest",
    "calibrate_threshold",
    "classify",
    "serialize_iforest",
    "deserialize_iforest",
]

EULER_GAMMA = 0.5772156649
MAGIC = b"IFv1"


def expected_path_c(n: int) -> float:
    """Average unsuccessful-search path length in a random BST of ``n`` keys.

    Uses ``H(i) ~ ln(i) + EULER_GAMMA`` for the harmonic number, including at
    n = 2, so ``c(2)`` is 0.1544 rather than 1.
    """
    if n <= 1:
        return 0.0
    return 2.0 * (math.log(n - 1) + EULER_GAMMA) - 2.0 * (n - 1) / n


@dataclass(frozen=True)
class ExternalNode:
    size: int


@dataclass(frozen=True)
class InternalNode:
    split_feature: int
    split_value: float
    left: IsolationTreeNode
    right: IsolationTreeNode


IsolationTreeNode = Union[InternalNode, ExternalNode]


def build_tree(
    sample: np.ndarray, height_limit: int, rng: np.random.Generator, _depth: int = 0
) -> IsolationTreeNode:
    """Grow one isolation tree on ``sample``.

    Growth stops at ``height_limit``, at a single row, or when no column has
    distinct values. Otherwise a feature is drawn uniformly from the columns
    with ``min < max`` and the cut is drawn uniformly strictly inside that
    range; rows with ``x < cut`` go left.
    """
    n = sample.shape[0]
    if n == 0:
        raise DataError("cannot build a tree on an empty sample")
    if _depth >= height_limit or n <= 1:
        return ExternalNode(n)
    lo = sample.min(axis=0)
    hi = sample.max(axis=0)
    splittable = np.flatnonzero(lo < hi)
    if splittable.size == 0:
        return ExternalNode(n)

    feature = int(splittable[rng.integers(splittable.size)])
    a, b = lo[feature], hi[feature]
    value = rng.uniform(a, b)
    while not a < value < b:
        value = rng.uniform(a, b)

    goes_left = sample[:, feature] < value
    return InternalNode(
        feature,
        float(value),
        build_tree(sample[goes_left], height_limit, rng, _depth + 1),
        build_tree(sample[~goes_left], height_limit, rng, _depth + 1),
    )


def path_length(root: IsolationTreeNode, point: np.ndarray, n_features: int | None = None) -> float:
    """Edges from ``root`` to the leaf reached by ``point``, plus ``c(leaf size)``."""
    point = np.asarray(point, dtype=np.float64)
    if point.ndim != 1 or (n_features is not None and point.shape[0] != n_features):
        raise DataError(f"point has shape {point.shape}, expected ({n_features},)")
    node = root
    depth = 0
    while isinstance(node, InternalNode):
        if node.split_feature >= point.shape[0]:
            raise DataError(f"point has {point.shape[0]} features, tree splits on index {node.split_feature}")
        node = node.left if point[node.split_feature] < node.split_value else node.right
        depth += 1
    return depth + expected_path_c(node.size)


def tree_height(root: IsolationTreeNode) -> int:
    if isinstance(root, ExternalNode):
        return 0
    return 1 + max(tree_height(root.left), tree_height(root.right))


def leaf_sizes(root: IsolationTreeNode) -> list[int]:
    if isinstance(root, ExternalNode):
        return [root.size]
    return leaf_sizes(root.left) + leaf_sizes(root.right)


def _compile(trees: tuple[IsolationTreeNode, ...]) -> tuple[np.ndarray, ...]:
    """Flatten trees into parallel arrays for the scoring kernel.

    Children of a node occupy adjacent slots ``child`` and ``child + 1`` so a
    step is ``child[node] + (x >= cut)``. Leaves point to themselves with a
    ``+inf`` cut, which lets every walk run a fixed number of steps. Leaves
    carry ``depth + c(size)``.
    """
    feature: list[int] = []
    threshold: list[float] = []
    child: list[int] = []
    value: list[float] = []
    roots: list[int] = []

    def alloc() -> int:
        feature.append(0)
        threshold.append(math.inf)
        child.append(len(child))
        value.append(0.0)
        return len(feature) - 1

    def fill(idx: int, node: IsolationTreeNode, depth: int) -> None:
        if isinstance(node, ExternalNode):
            value[idx] = depth + expected_path_c(node.size)
            return
        left = alloc()
        alloc()
        feature[idx] = node.split_feature
        threshold[idx] = node.split_value
        child[idx] = left
        fill(left, node.left, depth + 1)
        fill(left + 1, node.right, depth + 1)

    for tree in trees:
        root = alloc()
        roots.append(root)
        fill(root, tree, 0)
    return (
        np.array(roots, dtype=np.int64),
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(child, dtype=np.int64),
        np.array(value, dtype=np.float64),
    )


@numba.njit(cache=True, nogil=True)
def _mean_path_kernel(X, steps, roots, feature, threshold, child, value):  # pragma: no cover - jitted
    # Level-synchronous walk: one step for every row before the next step,
    # so consecutive iterations are independent loads rather than a chain.
    n = X.shape[0]
    n_trees = roots.shape[0]
    total = np.zeros(n)
    node = np.empty(n, dtype=np.int64)
    for t in range(n_trees):
        node[:] = roots[t]
        for _ in range(steps):
            for i in range(n):
                cur = node[i]
                node[i] = child[cur] + (X[i, feature[cur]] >= threshold[cur])
        for i in range(n):
            total[i] += value[node[i]]
    return total / n_trees


@dataclass(frozen=True)
class IForestParams:
    tree_count: int = 100
    subsample_size: int = 256
    contamination: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.tree_count < 1:
            raise ValueError(f"tree_count must be positive, got {self.tree_count}")
        if self.subsample_size < 2:
            raise ValueError(f"subsample_size must be at least 2, got {self.subsample_size}")
        if not 0.0 <= self.contamination <= 0.5:
            raise ValueError(f"contamination must lie in [0, 0.5], got {self.contamination}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")

    def to_dict(self) -> dict:
        return {
            "tree_count": self.tree_count,
            "subsample_size": self.subsample_size,
            "contamination": self.contamination,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class IsolationForestModel:
    """A fitted forest. Immutable; safe to score from several threads."""

    trees: tuple[IsolationTreeNode, ...]
    subsample_size: int
    n_features: int
    threshold: float
    params: IForestParams
    _flat: tuple[np.ndarray, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "trees", tuple(self.trees))
        object.__setattr__(self, "_flat", _compile(self.trees))

    @property
    def height_limit(self) -> int:
        return math.ceil(math.log2(self.subsample_size))


def score_from_mean_path(mean_path: np.ndarray | float, subsample_size: int) -> np.ndarray | float:
    return np.power(2.0, -np.asarray(mean_path, dtype=np.float64) / expected_path_c(subsample_size))


def _check_matrix(X: np.ndarray, n_features: int) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != n_features:
        raise DataError(f"expected a matrix with {n_features} columns, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DataError("input contains NaN or infinite values")
    return X


def mean_path_lengths(model: IsolationForestModel, X: np.ndarray) -> np.ndarray:
    X = _check_matrix(X, model.n_features)
    return _mean_path_kernel(X, model.height_limit, *model._flat)


def score_samples(model: IsolationForestModel, X: np.ndarray) -> np.ndarray:
    """Anomaly scores in (0, 1] for every row of ``X``; larger is more anomalous."""
    return score_from_mean_path(mean_path_lengths(model, X), model.subsample_size)


def score(model: IsolationForestModel, point: np.ndarray) -> float:
    point = np.asarray(point, dtype=np.float64)
    if point.ndim != 1:
        raise DataError(f"point must be 1-D, got shape {point.shape}")
    return float(score_samples(model, point[None, :])[0])


def calibrate_threshold(train_scores: np.ndarray, contamination: float) -> float:
    """Cut at the ``1 - contamination`` quantile of the training scores.

    With ``contamination == 0`` the threshold sits one ulp above the largest
    training score so no training point is flagged.
    """
    scores = np.asarray(train_scores, dtype=np.float64)
    if scores.size == 0:
        raise DataError("cannot calibrate a threshold on no scores")
    if not 0.0 <= contamination <= 0.5:
        raise ValueError(f"contamination must lie in [0, 0.5], got {contamination}")
    if contamination == 0.0:
        return float(np.nextafter(scores.max(), np.inf))
    return float(np.quantile(scores, 1.0 - contamination, method="linear"))


def fit_iforest(train: np.ndarray, params: IForestParams | None = None) -> IsolationForestModel:
    """Fit a forest on normal-only training rows.

    Every tree draws its subsample and cuts from its own generator spawned off
    ``params.seed``, so results do not depend on construction order.
    """
    params = params or IForestParams()
    train = np.asarray(train, dtype=np.float64)
    if train.ndim != 2:
        raise DataError(f"training data must be 2-D, got shape {train.shape}")
    n, d = train.shape
    if n < 2:
        raise DataError(f"need at least 2 training rows, got {n}")
    if not np.all(np.isfinite(train)):
        raise DataError("training data contains NaN or infinite values")

    psi = min(params.subsample_size, n)
    height_limit = math.ceil(math.log2(psi))
    trees = []
    for child in np.random.SeedSequence(params.seed).spawn(params.tree_count):
        rng = np.random.default_rng(child)
        rows = rng.choice(n, size=psi, replace=False)
        trees.append(build_tree(train[rows], height_limit, rng))

    unthresholded = IsolationForestModel(tuple(trees), psi, d, 1.0, params)
    threshold = calibrate_threshold(score_samples(unthresholded, train), params.contamination)
    return IsolationForestModel(unthresholded.trees, psi, d, threshold, params)


def classify(model: IsolationForestModel, X: np.ndarray) -> np.ndarray:
    """1 where the score is strictly above the threshold, else 0."""
    return (score_samples(model, X) > model.threshold).astype(np.int8)


def serialize_iforest(model: IsolationForestModel) -> bytes:
    """Encode as ``IFv1``: params, fitted scalars, then each tree in pre-order."""
    w = Writer(MAGIC)
    p = model.params
    w.u32(p.tree_count)
    w.u32(p.subsample_size)
    w.f64(p.contamination)
    w.i64(p.seed)
    w.u32(model.subsample_size)
    w.u32(model.n_features)
    w.f64(model.threshold)
    w.u32(len(model.trees))

    def emit(node: IsolationTreeNode) -> None:
        if isinstance(node, ExternalNode):
            w.u8(0)
            w.u32(node.size)
        else:
            w.u8(1)
            w.u32(node.split_feature)
            w.f64(node.split_value)
            emit(node.left)
            emit(node.right)

    for tree in model.trees:
        emit(tree)
    return w.getvalue()


def deserialize_iforest(data: bytes) -> IsolationForestModel:
    r = Reader(data, MAGIC)
    try:
        params = IForestParams(
            tree_count=r.u32(), subsample_size=r.u32(), contamination=r.f64(), seed=r.i64()
        )
    except ValueError as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"invalid forest parameters: {exc}") from None
    psi = r.u32()
    n_features = r.u32()
    threshold = r.f64()
    n_trees = r.u32()
    if n_trees != params.tree_count or psi < 2 or n_features < 1:
        raise ModelFormatError("inconsistent forest header")
    max_depth = math.ceil(math.log2(psi))

    def read(depth: int) -> IsolationTreeNode:
        tag = r.u8()
        if tag == 0:
            return ExternalNode(r.u32())
        if tag != 1 or depth >= max_depth:
            raise ModelFormatError(f"corrupt tree node (tag {tag}, depth {depth})")
        feature = r.u32()
        if feature >= n_features:
            raise ModelFormatError(f"split feature {feature} out of range")
        value = r.f64()
        return InternalNode(feature, value, read(depth + 1), read(depth + 1))

    trees = tuple(read(0) for _ in range(n_trees))
    r.finish()
    return IsolationForestModel(trees, psi, n_features, threshold, params)
