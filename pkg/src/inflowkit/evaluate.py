"""Scores, feature-importance rankings, learner runs and cluster ablation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import preprocess
from .dataset import SupervisedDataset, cluster_field, drop_cluster_columns, split_index
from .errors import DimensionMismatch, TooFewRows, UnfittedModel, UnknownCluster, ZeroVariance
from .learn import (
    ForestConfig,
    ForestModel,
    LassoConfig,
    LassoModel,
    SvcConfig,
    forest_fit,
    forest_predict,
    lasso_fit,
    lasso_predict,
    svc_fit,
    svc_predict,
)

CATEGORY_LABELS = (1, 2, 3, 4, 5, 6)
SLICES = ("full", "train", "test")
SLICE_DEFINITIONS = {
    "full": "train and test rows together (in-sample for the training part)",
    "train": "rows the model was fitted on",
    "test": "chronologically last rows, never seen in fitting",
}


# --------------------------------------------------------------------------
# metrics


def _pair(y_pred, y_true) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(y_pred, dtype=float).ravel()
    b = np.asarray(y_true, dtype=float).ravel()
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.size} predictions for {b.size} targets")
    if a.size == 0:
        raise DimensionMismatch("empty vectors")
    return a, b


def mae(y_pred, y_true) -> float:
    a, b = _pair(y_pred, y_true)
    return float(np.mean(np.abs(a - b)))


def mse(y_pred, y_true) -> float:
    a, b = _pair(y_pred, y_true)
    d = a - b
    return float(np.mean(d * d))


def r2(y_pred, y_true) -> float:
    a, b = _pair(y_pred, y_true)
    ss_tot = float(((b - b.mean()) ** 2).sum())
    if ss_tot == 0:
        raise ZeroVariance("r2 is undefined for a constant target")
    return 1.0 - float(((b - a) ** 2).sum()) / ss_tot


def f1_weighted(labels_pred, labels_true, label_set: Sequence = CATEGORY_LABELS) -> float:
    """Per-label F1 averaged with weights equal to each label's true support.

    Undefined precision or recall counts as 0.
    """
    p = np.asarray(labels_pred).ravel()
    t = np.asarray(labels_true).ravel()
    if p.shape != t.shape:
        raise DimensionMismatch(f"{p.size} predictions for {t.size} labels")
    allowed = set(label_set)
    stray = (set(p.tolist()) | set(t.tolist())) - allowed
    if stray:
        raise ValueError(f"labels outside the label set: {sorted(stray)}")
    if t.size == 0:
        raise DimensionMismatch("empty vectors")
    total = 0.0
    for lab in label_set:
        support = int((t == lab).sum())
        if support == 0:
            continue
        tp = int(((p == lab) & (t == lab)).sum())
        predicted = int((p == lab).sum())
        precision = tp / predicted if predicted else 0.0
        recall = tp / support
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        total += support * f1
    return total / t.size


def regression_scores(y_pred, y_true) -> dict:
    try:
        r2_value = r2(y_pred, y_true)
    except ZeroVariance:
        r2_value = None
    return {"mae": mae(y_pred, y_true), "mse": mse(y_pred, y_true), "r2": r2_value}


def classification_scores(y_pred, y_true) -> dict:
    scores = regression_scores(y_pred, y_true)
    scores["f1"] = f1_weighted(y_pred, y_true)
    return scores


# --------------------------------------------------------------------------
# importance


@dataclass(frozen=True)
class ImportanceEntry:
    method: str
    feature_name: str
    time_offset: int
    importance: float
    rank: int

    def as_row(self) -> dict:
        return {
            "method": self.method,
            "rank": self.rank,
            "feature": self.feature_name,
            "offset": self.time_offset,
            "importance": self.importance,
        }


def _rank(method: str, columns, values, magnitude) -> list[ImportanceEntry]:
    order = sorted(range(len(columns)), key=lambda j: (-magnitude[j], j))
    return [
        ImportanceEntry(method, columns[j][0], int(columns[j][1]), float(values[j]), r)
        for r, j in enumerate(order, start=1)
    ]


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    den = math.sqrt(float(xc @ xc) * float(yc @ yc))
    if den == 0:
        return 0.0
    return float(xc @ yc) / den


def correlation_importance(dataset: SupervisedDataset) -> list[ImportanceEntry]:
    """Signed Pearson r of every predictor with the target, ranked by |r|."""
    if dataset.n_rows < 3:
        raise TooFewRows(3, dataset.n_rows)
    y = np.asarray(dataset.y, dtype=float)
    r = np.array([pearson(dataset.X[:, j], y) for j in range(dataset.X.shape[1])])
    return _rank("correlation", dataset.columns, r, np.abs(r))


def lasso_importance(model: LassoModel | None, columns) -> list[ImportanceEntry]:
    if model is None:
        raise UnfittedModel("LASSO model has not been fitted")
    coef = np.abs(model.standardized_coefficients)
    if len(coef) != len(columns):
        raise DimensionMismatch(f"{len(coef)} coefficients for {len(columns)} columns")
    return _rank("lasso", columns, coef, coef)


def forest_importance_report(model: ForestModel | None, columns) -> list[ImportanceEntry]:
    if model is None:
        raise UnfittedModel("forest has not been fitted")
    imp = np.asarray(model.feature_importances, dtype=float)
    if len(imp) != len(columns):
        raise DimensionMismatch(f"{len(imp)} importances for {len(columns)} columns")
    s = imp.sum()
    if s > 0:
        imp = imp / s
    return _rank("forest", columns, imp, imp)


DISPLAY_NAMES = {
    "tr_inflow": "TR inflow",
    "mean_dev_time": "Mean development time",
    "releases_delivered": "Number of releases",
    "features_delivered": "Number of features",
}


def display_name(name: str, offset: int) -> str:
    """Human label in the ``Mean development time (t-2)`` style."""
    if name in DISPLAY_NAMES:
        base = DISPLAY_NAMES[name]
    elif name.startswith("tr_inflow_class_"):
        base = f"TR inflow class {name.rsplit('_', 1)[1]}"
    elif name.startswith("cluster_"):
        base = f"Cluster {name[len('cluster_'):]}"
    else:
        base = name
    return f"{base} (t)" if offset == 0 else f"{base} (t{offset})"


# --------------------------------------------------------------------------
# learner runs


@dataclass(frozen=True)
class LearnerSuite:
    lasso: LassoConfig = LassoConfig()
    forest_seed: int = 0
    n_trees: int = 10
    min_samples_split: int = 2
    bootstrap: bool = True
    svc: SvcConfig = SvcConfig()

    def forest(self, criterion: str) -> ForestConfig:
        return ForestConfig(
            n_trees=self.n_trees,
            min_samples_split=self.min_samples_split,
            criterion=criterion,
            bootstrap=self.bootstrap,
            seed=self.forest_seed,
        )


@dataclass
class ModelRun:
    name: str
    kind: str  # "regressor" or "classifier"
    metrics: dict
    model: object
    predictions: np.ndarray
    targets: np.ndarray
    columns: tuple
    split: int


def _slices(pred: np.ndarray, y: np.ndarray, cut: int, scorer) -> dict:
    return {
        "full": scorer(pred, y),
        "train": scorer(pred[:cut], y[:cut]),
        "test": scorer(pred[cut:], y[cut:]),
    }


def _scaled(dataset: SupervisedDataset, cut: int, scale_target: bool):
    scaler = preprocess.fit(preprocess.ScalerSpec("minmax"), dataset.X[:cut])
    X = preprocess.transform(scaler, dataset.X)
    y = np.asarray(dataset.y, dtype=float)
    y_scaler = None
    if scale_target:
        y_scaler = preprocess.fit(preprocess.ScalerSpec("minmax"), y[:cut, None])
        y = preprocess.transform(y_scaler, y[:, None])[:, 0]
    return X, y, scaler, y_scaler


def run_regressor(
    name: str, dataset: SupervisedDataset, config, test_fraction: float, threads: int = 1
) -> ModelRun:
    """Fit on the chronological training part of MinMax-scaled inputs and target."""
    cut = split_index(dataset.n_rows, test_fraction)
    if cut < 1 or cut >= dataset.n_rows:
        raise TooFewRows(2, dataset.n_rows)
    X, y, _, _ = _scaled(dataset, cut, scale_target=True)
    if isinstance(config, LassoConfig):
        model = lasso_fit(X[:cut], y[:cut], config)
        pred = lasso_predict(model, X)
    elif isinstance(config, ForestConfig):
        model = forest_fit(X[:cut], y[:cut], config, threads=threads)
        pred = forest_predict(model, X)
    else:
        raise TypeError(f"no regressor for config {type(config).__name__}")
    return ModelRun(name, "regressor", _slices(pred, y, cut, regression_scores), model, pred, y, dataset.columns, cut)


def run_classifier(
    name: str, dataset: SupervisedDataset, config, test_fraction: float, threads: int = 1
) -> ModelRun:
    """Fit on MinMax-scaled inputs; categories are kept as raw labels."""
    cut = split_index(dataset.n_rows, test_fraction)
    if cut < 1 or cut >= dataset.n_rows:
        raise TooFewRows(2, dataset.n_rows)
    X, y, _, _ = _scaled(dataset, cut, scale_target=False)
    y = y.astype(int)
    if isinstance(config, ForestConfig):
        model = forest_fit(X[:cut], y[:cut], config, threads=threads)
        pred = forest_predict(model, X)
    elif isinstance(config, SvcConfig):
        if len(np.unique(y[:cut])) < 2:
            # a single training class leaves nothing to separate
            model = None
            pred = np.full(len(y), y[0])
        else:
            model = svc_fit(X[:cut], y[:cut], config, threads=threads)
            pred = svc_predict(model, X)
    else:
        raise TypeError(f"no classifier for config {type(config).__name__}")
    pred = np.asarray(pred, dtype=int)
    return ModelRun(name, "classifier", _slices(pred, y, cut, classification_scores), model, pred, y, dataset.columns, cut)


def run_suite(
    regression: SupervisedDataset,
    categories: SupervisedDataset | None,
    suite: LearnerSuite,
    test_fraction: float,
    threads: int = 1,
) -> dict[str, ModelRun]:
    runs = {
        "random_forest_regressor": run_regressor(
            "random_forest_regressor", regression, suite.forest("mse"), test_fraction, threads
        ),
        "lasso": run_regressor("lasso", regression, suite.lasso, test_fraction, threads),
    }
    if categories is not None:
        runs["random_forest_classifier"] = run_classifier(
            "random_forest_classifier", categories, suite.forest("gini"), test_fraction, threads
        )
        runs["svc"] = run_classifier("svc", categories, suite.svc, test_fraction, threads)
    return runs


# --------------------------------------------------------------------------
# ablation


@dataclass
class AblationResult:
    removed_clusters: tuple[int, ...]
    learner: str
    metrics: dict
    baseline: dict
    delta_vs_baseline: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "removed_clusters": list(self.removed_clusters),
            "learner": self.learner,
            "metrics": self.metrics,
            "delta_vs_baseline": self.delta_vs_baseline,
        }


def _delta(after: dict, before: dict) -> dict:
    out = {}
    for sl, scores in after.items():
        out[sl] = {}
        for k, v in scores.items():
            b = before.get(sl, {}).get(k)
            out[sl][k] = None if v is None or b is None else v - b
    return out


def ablate_clusters(
    dataset: SupervisedDataset,
    cluster_ids: Sequence[int],
    learner_config,
    test_fraction: float = 0.2,
    baseline: ModelRun | None = None,
    threads: int = 1,
) -> AblationResult:
    """Remove the named cluster-count columns and refit with the same seed and split."""
    present = {n for n, _ in dataset.columns if n.startswith("cluster_")}
    if not present:
        raise UnknownCluster(cluster_ids[0] if cluster_ids else -1)
    for c in cluster_ids:
        if cluster_field(c) not in present:
            raise UnknownCluster(c)
    run = run_classifier if dataset.target_kind == "category_1_6" else run_regressor
    name = type(learner_config).__name__
    if baseline is None:
        baseline = run(name, dataset, learner_config, test_fraction, threads)
    reduced = drop_cluster_columns(dataset, cluster_ids)
    after = run(name, reduced, learner_config, test_fraction, threads)
    return AblationResult(
        removed_clusters=tuple(sorted(cluster_ids)),
        learner=baseline.name,
        metrics=after.metrics,
        baseline=baseline.metrics,
        delta_vs_baseline=_delta(after.metrics, baseline.metrics),
    )


# --------------------------------------------------------------------------
# clustering agreement


def best_match_agreement(labels, truth) -> float:
    """Share of items on which two labelings agree under the best one-to-one
    matching of their label values (noise -1 is an ordinary label here)."""
    from scipy.optimize import linear_sum_assignment

    a = np.asarray(labels).ravel()
    b = np.asarray(truth).ravel()
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.size} labels against {b.size}")
    if a.size == 0:
        raise DimensionMismatch("empty labelings")
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    table = np.zeros((len(ua), len(ub)))
    np.add.at(table, (ia, ib), 1)
    rows, cols = linear_sum_assignment(table, maximize=True)
    return float(table[rows, cols].sum() / a.size)


def matched_labels(labels, truth) -> dict:
    """Truth label -> predicted label under the best matching."""
    from scipy.optimize import linear_sum_assignment

    a = np.asarray(labels).ravel()
    b = np.asarray(truth).ravel()
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    table = np.zeros((len(ua), len(ub)))
    np.add.at(table, (ia, ib), 1)
    rows, cols = linear_sum_assignment(table, maximize=True)
    return {ub[c].item(): ua[r].item() for r, c in zip(rows, cols)}
