"""Random forests of axis-aligned threshold trees (Gini for classes, MSE for values)."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from ..errors import DimensionMismatch, EmptyInput

Criterion = Literal["gini", "mse"]


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 10
    min_samples_split: int = 2
    max_depth: int | None = None
    criterion: Criterion = "gini"
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.criterion not in ("gini", "mse"):
            raise ValueError(f"unknown criterion {self.criterion!r}")


@dataclass
class Tree:
    """Flat arrays; ``feature[i] == -1`` marks a leaf.

    Leaves hold class counts (classifier) or the mean target (regressor) in
    ``value``.  Samples with ``x[feature] <= threshold`` go left.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    importances: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=int)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            nd = node[active]
            go_left = X[active, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = active[self.feature[node[active]] >= 0]
        return node

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }


@dataclass
class ForestModel:
    trees: list[Tree]
    mode: Literal["classifier", "regressor"]
    feature_importances: np.ndarray
    classes: np.ndarray = field(default_factory=lambda: np.empty(0))
    n_features: int = 0

    @property
    def importances_all_zero(self) -> bool:
        return not self.feature_importances.any()

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "classes": self.classes.tolist(),
            "n_features": self.n_features,
            "feature_importances": self.feature_importances.tolist(),
            "trees": [t.to_dict() for t in self.trees],
        }


def gini(counts) -> float:
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - (p * p).sum())


def _best_split(X: np.ndarray, target: np.ndarray, classifier: bool):
    """Lowest weighted child impurity over all features and midpoints.

    For classifiers ``target`` is a one-hot matrix, for regressors a vector.
    Returns (feature, threshold, child_impurity_sum) or None; ties keep the
    lowest feature index and then the lowest threshold.
    """
    n = len(X)
    best = None
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        cut = np.flatnonzero(xs[1:] > xs[:-1])
        if cut.size == 0:
            continue
        n_left = (cut + 1).astype(float)
        n_right = n - n_left
        if classifier:
            cum = np.cumsum(target[order], axis=0)[cut]
            tot = target.sum(axis=0)
            right = tot - cum
            # n * gini summed over both children
            score = (n_left - (cum * cum).sum(axis=1) / n_left) + (n_right - (right * right).sum(axis=1) / n_right)
        else:
            ys = target[order]
            s1 = np.cumsum(ys)[cut]
            s2 = np.cumsum(ys * ys)[cut]
            t1, t2 = ys.sum(), (ys * ys).sum()
            # n * variance summed over both children
            score = (s2 - s1 * s1 / n_left) + ((t2 - s2) - (t1 - s1) ** 2 / n_right)
        i = int(np.argmin(score))
        if best is None or score[i] < best[2]:
            lo, hi = xs[cut[i]], xs[cut[i] + 1]
            mid = lo + 0.5 * (hi - lo)
            # adjacent floats can round the midpoint up onto hi
            best = (j, mid if mid < hi else lo, float(score[i]))
    return best


def _grow(X: np.ndarray, y: np.ndarray, n_classes: int, classifier: bool, config: ForestConfig) -> Tree:
    feature, threshold, left, right, value = [], [], [], [], []
    importances = np.zeros(X.shape[1])
    n_root = len(X)
    target = np.eye(n_classes)[y] if classifier else y

    def node_impurity(idx) -> float:
        if classifier:
            return gini(target[idx].sum(axis=0))
        return float(y[idx].var())

    def leaf_value(idx):
        if classifier:
            return np.bincount(y[idx], minlength=n_classes).astype(float)
        return np.array([y[idx].mean()])

    def new_node():
        for col in (feature, left, right):
            col.append(-1)
        threshold.append(0.0)
        value.append(None)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(n_root), 0)]
    while stack:
        nid, idx, depth = stack.pop()
        value[nid] = leaf_value(idx)
        imp = node_impurity(idx)
        if (
            imp <= 0.0
            or len(idx) < config.min_samples_split
            or (config.max_depth is not None and depth >= config.max_depth)
        ):
            continue
        split = _best_split(X[idx], target[idx], classifier)
        if split is None:
            continue
        j, thr, child_sum = split
        mask = X[idx, j] <= thr
        feature[nid] = j
        threshold[nid] = thr
        importances[j] += (len(idx) * imp - child_sum) / n_root
        li, ri = new_node(), new_node()
        left[nid], right[nid] = li, ri
        stack.append((ri, idx[~mask], depth + 1))
        stack.append((li, idx[mask], depth + 1))
    width = n_classes if classifier else 1
    vals = np.array([v if v is not None else np.zeros(width) for v in value])
    return Tree(
        feature=np.array(feature),
        threshold=np.array(threshold, dtype=float),
        left=np.array(left),
        right=np.array(right),
        value=vals,
        importances=np.maximum(importances, 0.0),
    )


def forest_fit(X, y, config: ForestConfig = ForestConfig(), threads: int = 1) -> ForestModel:
    """Fit ``n_trees`` trees; classifier when the criterion is Gini.

    Tree t draws its bootstrap sample from a generator seeded with
    ``(config.seed, t)``, so results do not depend on ``threads``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyInput("X must be a non-empty 2-D matrix")
    if len(y) != len(X):
        raise DimensionMismatch(f"{len(X)} rows but {len(y)} targets")
    classifier = config.criterion == "gini"
    if classifier:
        classes, codes = np.unique(y, return_inverse=True)
    else:
        classes, codes = np.empty(0), y.astype(float)
    n = len(X)

    def one_tree(t: int) -> Tree:
        if config.bootstrap:
            rng = np.random.default_rng([config.seed, t])
            sample = rng.integers(0, n, size=n)
        else:
            sample = np.arange(n)
        return _grow(X[sample], codes[sample], len(classes), classifier, config)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(one_tree, range(config.n_trees)))
    else:
        trees = [one_tree(t) for t in range(config.n_trees)]
    total = np.sum([t.importances for t in trees], axis=0)
    s = total.sum()
    importances = total / s if s > 0 else np.zeros(X.shape[1])
    return ForestModel(
        trees=trees,
        mode="classifier" if classifier else "regressor",
        feature_importances=importances,
        classes=classes,
        n_features=X.shape[1],
    )


def tree_predict(model: ForestModel, tree: Tree, X: np.ndarray) -> np.ndarray:
    leaves = tree.apply(X)
    if model.mode == "classifier":
        return model.classes[tree.value[leaves].argmax(axis=1)]
    return tree.value[leaves, 0]


def forest_predict(model: ForestModel, X) -> np.ndarray:
    """Majority vote (lowest label on ties) or mean of tree outputs."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DimensionMismatch(f"model expects {model.n_features} columns, got shape {X.shape}")
    if len(X) == 0:
        return np.empty(0, dtype=model.classes.dtype if model.mode == "classifier" else float)
    if model.mode == "regressor":
        return np.mean([tree_predict(model, t, X) for t in model.trees], axis=0)
    votes = np.zeros((len(X), len(model.classes)), dtype=int)
    rows = np.arange(len(X))
    for t in model.trees:
        votes[rows, t.value[t.apply(X)].argmax(axis=1)] += 1
    return model.classes[votes.argmax(axis=1)]
