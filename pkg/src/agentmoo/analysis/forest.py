"""Random regression forest with impurity-based feature importance.

Small, dependency-light CART implementation sized for a few dozen evaluated
configurations.  Each tree draws its bootstrap sample and split candidates
from its own stream, seeded by (master seed, tree index), so results do not
depend on how trees are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

_MIN_GAIN = 1e-12


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 200
    max_features: int | None = None  # None -> ceil(n_features / 3)
    min_samples_leaf: int = 1
    seed: int = 0

    def resolved_max_features(self, n_features: int) -> int:
        if self.max_features is None:
            return max(1, math.ceil(n_features / 3))
        return max(1, min(self.max_features, n_features))

    def to_json(self, n_features: int | None = None) -> dict:
        mf = self.max_features
        if mf is None and n_features is not None:
            mf = self.resolved_max_features(n_features)
        return {
            "n_trees": self.n_trees,
            "max_features": mf,
            "min_samples_leaf": self.min_samples_leaf,
            "seed": self.seed,
        }


@dataclass
class _Node:
    value: float
    feature: int = -1
    threshold: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


@dataclass
class RegressionTree:
    root: _Node
    bootstrap: np.ndarray
    impurity_decrease: np.ndarray  # per feature, SSE reduction / n_samples

    def predict_one(self, x: np.ndarray) -> float:
        node = self.root
        while not node.is_leaf:
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node.value

    @property
    def n_leaves(self) -> int:
        stack, leaves = [self.root], 0
        while stack:
            node = stack.pop()
            if node.is_leaf:
                leaves += 1
            else:
                stack.extend((node.left, node.right))
        return leaves


@dataclass
class RegressionForest:
    trees: list[RegressionTree]
    params: ForestParams
    n_features: int
    feature_names: list[str] = field(default_factory=list)

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.array([np.mean([t.predict_one(row) for t in self.trees]) for row in X])


def _best_split(X: np.ndarray, y: np.ndarray, idx: np.ndarray, order_of_features: np.ndarray, max_features: int, min_leaf: int):
    """Best variance-reduction split over the first ``max_features`` features that vary in this node.

    Features constant within the node are skipped without using up a slot.
    """
    n = len(idx)
    total = y[idx].sum()
    parent_sse = float(np.sum((y[idx] - total / n) ** 2))
    best = None  # (gain, feature, threshold)
    visited = 0
    for f in order_of_features:
        if visited == max_features:
            break
        xs = X[idx, f]
        if np.all(xs == xs[0]):
            continue
        visited += 1
        order = np.argsort(xs, kind="mergesort")
        xs_sorted = xs[order]
        ys = y[idx][order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys * ys)
        sum_all, sq_all = csum[-1], csq[-1]
        for i in range(min_leaf - 1, n - min_leaf):
            if xs_sorted[i] == xs_sorted[i + 1]:
                continue
            nl, nr = i + 1, n - i - 1
            sl, sr = csum[i], sum_all - csum[i]
            sse = (csq[i] - sl * sl / nl) + ((sq_all - csq[i]) - sr * sr / nr)
            gain = parent_sse - sse
            if best is None or gain > best[0] + _MIN_GAIN:
                threshold = (xs_sorted[i] + xs_sorted[i + 1]) / 2
                if threshold >= xs_sorted[i + 1]:
                    # midpoint of adjacent floats can round up onto the right value
                    threshold = xs_sorted[i]
                best = (gain, int(f), threshold)
    return best


def _grow(X, y, idx, rng, max_features, min_leaf, importance) -> _Node:
    values = y[idx]
    node = _Node(float(values.mean()))
    if len(idx) < 2 * min_leaf or np.all(values == values[0]):
        return node
    split = _best_split(X, y, idx, rng.permutation(X.shape[1]), max_features, min_leaf)
    if split is None or split[0] <= _MIN_GAIN:
        return node
    gain, f, threshold = split
    importance[f] += gain
    mask = X[idx, f] <= threshold
    node.feature, node.threshold = f, threshold
    node.left = _grow(X, y, idx[mask], rng, max_features, min_leaf, importance)
    node.right = _grow(X, y, idx[~mask], rng, max_features, min_leaf, importance)
    return node


def tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(tree_index,)))


def fit_regression_forest(
    features,
    targets,
    params: ForestParams = ForestParams(),
    feature_names: Sequence[str] | None = None,
    bootstrap: Sequence[Sequence[int]] | None = None,
) -> RegressionForest:
    """Fit ``params.n_trees`` variance-reduction CART trees on bootstrap resamples.

    ``bootstrap`` overrides the drawn resample indices per tree (the draw still
    happens, so the split-feature stream is unchanged); it exists to check the
    estimator against reordered copies of the same data.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("features must be an (n_samples, n_features) matrix matching targets")
    n, p = X.shape
    if n < 2:
        raise ValueError("too few records: need at least 2 samples")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("features and targets must be finite")
    max_features = params.resolved_max_features(p)
    trees = []
    for t in range(params.n_trees):
        rng = tree_rng(params.seed, t)
        idx = rng.integers(0, n, size=n)
        if bootstrap is not None:
            idx = np.asarray(bootstrap[t], dtype=int)
        importance = np.zeros(p)
        root = _grow(X, y, idx, rng, max_features, params.min_samples_leaf, importance)
        trees.append(RegressionTree(root, idx, importance / n))
    names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(p)]
    return RegressionForest(trees, params, p, names)


def feature_importance(forest: RegressionForest) -> dict[str, float]:
    """Mean decrease in impurity per feature, normalized to sum to one (all zero if no tree split)."""
    raw = np.mean([t.impurity_decrease for t in forest.trees], axis=0)
    total = raw.sum()
    if total <= 0:
        return {name: 0.0 for name in forest.feature_names}
    return {name: float(v / total) for name, v in zip(forest.feature_names, raw)}
