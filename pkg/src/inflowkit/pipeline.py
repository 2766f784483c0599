"""Orchestration of the three experiments and their report files.

Test 1 predicts monthly trouble-report inflow from lagged period fields.
Test 2 clusters software features by their change footprint.  Test 3 adds
per-period cluster counts to the Test 1 inputs and runs importance and
ablation analyses.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from . import cluster, corpus, dataset, evaluate, preprocess, report, synth
from .errors import CorpusError, InflowError, InvalidConfig
from .learn import LassoConfig, SvcConfig
from .synth import SynthConfig

log = logging.getLogger(__name__)

LEVELS = ("system", "subsystem")
MEASURES = ("files", "loc")
TOP_IMPORTANCE = 8
TOP_FOREST = 5

NOTES = [
    "Silhouette scores exclude DBSCAN noise points (label -1).",
    "Robust v1 uses the 25th-75th percentile window and Robust v2 the 10th-90th; "
    "the original distinction between the two variants is unknown.",
    "Neural models (categorical and regressive LSTM, CNN) are out of scope and not reported.",
    "Importance tables list only defined column names; development-time bins are not modelled.",
    "The 'full' slice is train and test rows together; a train-only slice is reported as well.",
]


def default_corpus_dir() -> Path:
    return Path(str(resources.files("inflowkit") / "data" / "default_corpus"))


@dataclass(frozen=True)
class RunConfig:
    corpus_dir: str | None = None
    out_dir: str = "out"
    seed: int = 0
    granularity: str = "month"
    lag: int = 4
    split_fraction: float = 0.2
    threads: int = 1
    scalers: tuple[str, ...] = preprocess.SCALER_KINDS
    levels: tuple[str, ...] = LEVELS
    measures: tuple[str, ...] = MEASURES
    class_targets: tuple[int, ...] = (2, 4)
    selection: cluster.SelectionPolicy = cluster.SelectionPolicy(max_noise_fraction=0.5)
    min_pts_range: tuple[int, ...] = cluster.DEFAULT_MIN_PTS
    eps_range: tuple[float, ...] = cluster.DEFAULT_EPS
    k_range: tuple[int, ...] = cluster.DEFAULT_K_RANGE
    kmeans_n_init: int = 10
    lasso: LassoConfig = LassoConfig()
    n_trees: int = 10
    min_samples_split: int = 2
    bootstrap: bool = True
    svc: SvcConfig = SvcConfig()
    synth: SynthConfig = SynthConfig()

    def validate(self) -> "RunConfig":
        if self.granularity not in ("month", "release"):
            raise InvalidConfig(f"granularity must be month or release, got {self.granularity!r}")
        if self.lag < 1:
            raise InvalidConfig("lag must be >= 1")
        if not 0 < self.split_fraction < 1:
            raise InvalidConfig("split fraction must lie strictly between 0 and 1")
        if self.threads < 1:
            raise InvalidConfig("threads must be >= 1")
        for s in self.scalers:
            if s not in preprocess.SCALER_KINDS:
                raise InvalidConfig(f"unknown scaler {s!r}")
        if not set(self.levels) <= set(LEVELS) or not set(self.measures) <= set(MEASURES):
            raise InvalidConfig("unknown footprint level or measure")
        for k in self.class_targets:
            if k not in dataset.IMPORTANCE_CLASSES:
                raise InvalidConfig(f"importance class must be in 1..5, got {k}")
        if not self.min_pts_range or not self.eps_range:
            raise InvalidConfig("empty DBSCAN grid")
        if min(self.eps_range) <= 0 or min(self.min_pts_range) < 1:
            raise InvalidConfig("eps must be positive and min_pts >= 1")
        if not self.k_range or min(self.k_range) < 1:
            raise InvalidConfig("k values must be >= 1")
        self.synth.validate()
        return self

    def learners(self) -> evaluate.LearnerSuite:
        return evaluate.LearnerSuite(
            lasso=self.lasso,
            forest_seed=self.seed,
            n_trees=self.n_trees,
            min_samples_split=self.min_samples_split,
            bootstrap=self.bootstrap,
            svc=dataclasses.replace(self.svc, seed=self.seed),
        )

    def lag_config(self) -> dataset.LagConfig:
        return dataset.LagConfig(lag=self.lag)

    def resolved_corpus_dir(self) -> Path:
        return Path(self.corpus_dir) if self.corpus_dir else default_corpus_dir()

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("out_dir")
        d.pop("threads")  # output must not depend on it
        d["corpus_dir"] = None if self.corpus_dir is None else str(self.corpus_dir)
        return d

    @classmethod
    def from_dict(cls, d: dict, base: "RunConfig | None" = None) -> "RunConfig":
        """Overlay a JSON document onto ``base`` (defaults when omitted)."""
        base = base or cls()
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        updates = {}
        try:
            for k, v in d.items():
                if k == "selection":
                    updates[k] = dataclasses.replace(base.selection, **v)
                elif k == "lasso":
                    updates[k] = dataclasses.replace(base.lasso, **v)
                elif k == "svc":
                    updates[k] = dataclasses.replace(base.svc, **v)
                elif k == "synth":
                    updates[k] = SynthConfig.from_dict(v)
                elif isinstance(v, list):
                    updates[k] = tuple(v)
                else:
                    updates[k] = v
            return dataclasses.replace(base, **updates).validate()
        except (TypeError, ValueError) as exc:
            raise InvalidConfig(str(exc)) from None


class StageError(InflowError):
    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"{stage}: {type(cause).__name__}: {cause}")


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (CorpusError, InvalidConfig):
        raise
    except InflowError as exc:
        raise StageError(name, exc) from exc


# --------------------------------------------------------------------------
# validate and synth


def cmd_validate(directory) -> tuple[dict, int]:
    """Load, link and consolidate a corpus directory; exit code 0 iff clean."""
    d = Path(directory)
    diag: dict = {"corpus_dir": str(d), "errors": []}
    try:
        bundle = corpus.load_corpus_dir(d)
    except CorpusError as exc:
        diag["errors"].append({"kind": type(exc).__name__, "message": str(exc), **_error_fields(exc)})
        return diag, 1
    except OSError as exc:
        diag["errors"].append({"kind": type(exc).__name__, "message": str(exc)})
        return diag, 1
    prepared = corpus.prepare(bundle)
    orphans = sorted({c.feature_id for c in prepared.orphan_commits()})
    counts = corpus.subsystem_counts(bundle)
    diag.update(
        counts=bundle.summary(),
        orphan_commit_features=orphans,
        unreleased_features=prepared.unreleased_features(),
        subsystems=len(counts),
        consolidated_subsystems=sorted(s for s, n in counts.items() if n < corpus.CONSOLIDATION_THRESHOLD),
    )
    for fid in orphans:
        diag["errors"].append({"kind": "OrphanCommit", "message": f"commits reference unknown feature {fid}"})
    return diag, 0 if not diag["errors"] else 1


def _error_fields(exc: Exception) -> dict:
    keep = ("row", "column", "reason", "key", "owner", "path")
    out = {k: getattr(exc, k) for k in keep if getattr(exc, k, None) is not None}
    if getattr(exc, "kind", None) is not None:
        out["record"] = exc.kind  # "kind" already names the error class
    return out


def cmd_synth(config: RunConfig, out_dir=None) -> list[Path]:
    bundle, gt = synth.generate_corpus(config.synth)
    return synth.write_corpus(bundle, gt, out_dir or config.out_dir)


# --------------------------------------------------------------------------
# experiments


def load_prepared(config: RunConfig) -> corpus.CorpusBundle:
    return corpus.prepare(corpus.load_corpus_dir(config.resolved_corpus_dir()))


def _datasets(table: dataset.TimeSeriesTable, config: RunConfig):
    lag = config.lag_config()
    reg = _stage("dataset", dataset.build_lagged, table, lag, "regression_inflow")
    cat = _stage("dataset", dataset.build_lagged, table, lag, "category_1_6")
    return reg, cat


def _dataset_info(ds: dataset.SupervisedDataset, config: RunConfig) -> dict:
    cut = dataset.split_index(ds.n_rows, config.split_fraction)
    return {
        "rows": ds.n_rows,
        "columns": ds.column_labels(),
        "train_rows": cut,
        "test_rows": ds.n_rows - cut,
        "first_period": ds.periods[0] if ds.periods else None,
        "split_period": ds.periods[cut] if ds.periods and cut < ds.n_rows else None,
        "last_period": ds.periods[-1] if ds.periods else None,
    }


def _performance(runs: dict[str, evaluate.ModelRun]) -> dict:
    return {name: run.metrics for name, run in runs.items()}


def _top(entries, k) -> list[dict]:
    return [
        dict(e.as_row(), label=evaluate.display_name(e.feature_name, e.time_offset)) for e in entries[:k]
    ]


def run_test1(config: RunConfig, bundle: corpus.CorpusBundle) -> dict:
    table = _stage("aggregate", dataset.aggregate_periods, bundle, config.granularity)
    reg, cat = _datasets(table, config)
    runs = _stage("learn", evaluate.run_suite, reg, cat, config.learners(), config.split_fraction, config.threads)
    rf_c = runs["random_forest_classifier"]
    rf_r = runs["random_forest_regressor"]
    return {
        "dataset": _dataset_info(reg, config),
        "slices": evaluate.SLICE_DEFINITIONS,
        "performance": _performance(runs),
        "forest_importance": {
            "random_forest_classifier": _top(evaluate.forest_importance_report(rf_c.model, cat.columns), TOP_FOREST),
            "random_forest_regressor": _top(evaluate.forest_importance_report(rf_r.model, reg.columns), TOP_FOREST),
        },
        "lasso": {"converged": runs["lasso"].model.converged, "nonzero": int(np.count_nonzero(runs["lasso"].model.coefficients))},
        "series": {
            "periods": list(reg.periods),
            "actual_scaled": rf_r.targets.tolist(),
            "forest_regressor_scaled": rf_r.predictions.tolist(),
            "lasso_scaled": runs["lasso"].predictions.tolist(),
        },
    }


@dataclass
class Combination:
    level: str
    measure: str
    scaler: str
    feature_ids: list[str]
    units: list[str]
    dbscan: list[tuple[cluster.DbscanConfig, cluster.ClusterModel]] = field(default_factory=list)
    kmeans: list[cluster.ClusterModel] = field(default_factory=list)

    @property
    def key(self) -> str:
        return f"{self.level}_{self.measure}_{self.scaler}"

    def candidates(self) -> list[cluster.ClusterModel]:
        return [m for _, m in self.dbscan] + self.kmeans


def _run_combination(config: RunConfig, bundle, level, measure, scaler) -> Combination:
    ids, units, X = corpus.footprint_matrix(corpus.build_footprints(bundle, level, measure))
    if len(ids) == 0:
        raise InvalidConfig(f"no footprints at {level}/{measure}")
    _, Z = preprocess.fit_transform(preprocess.ScalerSpec(scaler), X)
    tag = {"level": level, "measure": measure, "scaler": scaler}
    combo = Combination(level, measure, scaler, ids, units)
    combo.dbscan = cluster.grid_search_dbscan(Z, config.min_pts_range, config.eps_range, params=tag)
    combo.kmeans = cluster.kmeans_sweep(Z, config.k_range, seed=config.seed, n_init=config.kmeans_n_init, params=tag)
    return combo


def _best_or_none(models, policy):
    try:
        return cluster.select_model(models, policy)
    except (InflowError, ValueError):
        return None


def run_test2(config: RunConfig, bundle: corpus.CorpusBundle, ground_truth: synth.GroundTruth | None = None):
    """Cluster every (level, measure, scaler) combination and select one model.

    Returns (report, combinations, selected model, feature id -> cluster id).
    """
    jobs = [(lv, ms, sc) for lv in config.levels for ms in config.measures for sc in config.scalers]

    def work(job):
        return _stage("cluster", _run_combination, config, bundle, *job)

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            combos = list(pool.map(work, jobs))
    else:
        combos = [work(j) for j in jobs]
    candidates = [m for c in combos for m in c.candidates()]
    try:
        winner = cluster.select_model(candidates, config.selection)
    except InflowError as exc:
        raise StageError("select", exc) from exc
    owner = next(c for c in combos if any(m is winner for m in c.candidates()))
    assignments = winner.assignments(owner.feature_ids)

    summary_rows = []
    for c in combos:
        for algo, models in (("kmeans", c.kmeans), ("dbscan", [m for _, m in c.dbscan])):
            best = _best_or_none(models, config.selection)
            summary_rows.append(
                {
                    "level": c.level,
                    "measure": c.measure,
                    "scaler": c.scaler,
                    "algorithm": algo,
                    "best": None if best is None else _model_row(best),
                }
            )
    rep = {
        "combinations": [c.key for c in combos],
        "candidates": len(candidates),
        "policy": dataclasses.asdict(config.selection),
        "selected": _model_row(winner) | {"units": owner.units, "cluster_sizes": _sizes(winner.labels)},
        "per_combination_best": summary_rows,
        "annotation": (
            "selected representation: "
            f"{owner.measure} at the {owner.level} level with the {owner.scaler} scaler"
        ),
    }
    if ground_truth is not None:
        truth = ground_truth.labels_for(owner.feature_ids)
        match = evaluate.matched_labels(winner.labels, truth)
        rep["ground_truth"] = {
            "agreement": evaluate.best_match_agreement(winner.labels, truth),
            "archetype_to_cluster": {ground_truth.archetype_names[k]: v for k, v in sorted(match.items())},
            "causal_cluster": match.get(ground_truth.causal_archetype),
        }
    return rep, combos, winner, assignments


def refit_selected(config: RunConfig, bundle: corpus.CorpusBundle, selected: dict) -> dict[str, int]:
    """Feature assignments of a reported Test-2 selection, refit on its own."""
    ids, _, X = corpus.footprint_matrix(corpus.build_footprints(bundle, selected["level"], selected["measure"]))
    _, Z = preprocess.fit_transform(preprocess.ScalerSpec(selected["scaler"]), X)
    if selected["algorithm"] == "dbscan":
        [(_, model)] = cluster.grid_search_dbscan(Z, (selected["min_pts"],), (selected["eps"],))
    else:
        [model] = cluster.kmeans_sweep(Z, (selected["k"],), seed=config.seed, n_init=config.kmeans_n_init)
    return model.assignments(ids)


def _model_row(m: cluster.ClusterModel) -> dict:
    row = {
        "algorithm": m.algorithm,
        "clusters": m.cluster_count,
        "silhouette": m.silhouette,
        "largest_fraction": m.largest_fraction,
        "noise_fraction": m.noise_fraction,
    }
    for k in ("eps", "min_pts", "k", "level", "measure", "scaler"):
        if k in m.params:
            row[k] = m.params[k]
    return row


def _sizes(labels: np.ndarray) -> dict:
    ids, counts = np.unique(labels, return_counts=True)
    return {int(i): int(c) for i, c in zip(ids, counts)}


def run_test3(
    config: RunConfig,
    bundle: corpus.CorpusBundle,
    assignments: dict[str, int] | None,
) -> dict:
    """Test 1 learners on inputs extended with cluster counts; same split."""
    base = _stage("aggregate", dataset.aggregate_periods, bundle, config.granularity)
    table = _stage("augment", dataset.augment_with_clusters, base, assignments or {})
    reg, cat = _datasets(table, config)
    suite = config.learners()
    runs = _stage("learn", evaluate.run_suite, reg, cat, suite, config.split_fraction, config.threads)
    targets = {"total": (reg, runs)}
    for k in config.class_targets:
        ds_k = _stage("dataset", dataset.build_lagged, table, config.lag_config(), "regression_inflow_class_k", k)
        targets[f"class_{k}"] = (ds_k, _stage("learn", evaluate.run_suite, ds_k, None, suite, config.split_fraction, config.threads))

    importance = {}
    for name, (ds_t, runs_t) in targets.items():
        importance[name] = {
            "correlation": [e.as_row() for e in evaluate.correlation_importance(ds_t)],
            "lasso": [e.as_row() for e in evaluate.lasso_importance(runs_t["lasso"].model, ds_t.columns)],
            "forest": [
                e.as_row() for e in evaluate.forest_importance_report(runs_t["random_forest_regressor"].model, ds_t.columns)
            ],
        }

    ablation = []
    cluster_ids = table.cluster_ids()
    ladder = [[c] for c in cluster_ids] + ([cluster_ids] if len(cluster_ids) > 1 else [])
    learners = (
        ("random_forest_regressor", reg, suite.forest("mse")),
        ("lasso", reg, suite.lasso),
        ("random_forest_classifier", cat, suite.forest("gini")),
        ("svc", cat, suite.svc),
    )
    for removed in ladder:
        for learner, ds_l, cfg in learners:
            res = _stage(
                "ablation",
                evaluate.ablate_clusters,
                ds_l,
                removed,
                cfg,
                config.split_fraction,
                runs[learner],
                config.threads,
            )
            ablation.append(
                {
                    "removed": "all" if len(removed) == len(cluster_ids) else removed[0],
                    "learner": learner,
                    "metrics": res.metrics,
                    "delta_vs_baseline": res.delta_vs_baseline,
                }
            )
    return {
        "dataset": _dataset_info(reg, config),
        "cluster_ids": cluster_ids,
        "slices": evaluate.SLICE_DEFINITIONS,
        "performance": {
            name: _performance(r) for name, (_, r) in targets.items()
        },
        "importance": importance,
        "ablation": ablation,
    }


# --------------------------------------------------------------------------
# report files


MODEL_ORDER = ("random_forest_classifier", "random_forest_regressor", "lasso", "svc")
METRIC_ROWS = (("mae", "MAE"), ("r2", "R2"), ("mse", "MSE"), ("f1", "f1"))
SLICE_ROWS = (("full", "Full set"), ("test", "Test set"), ("train", "Train set"))


def performance_rows(perf: dict) -> tuple[list[str], list[list]]:
    models = [m for m in MODEL_ORDER if m in perf]
    header = ["score", "slice"] + models
    rows = []
    for key, label in METRIC_ROWS:
        for sl, sl_label in SLICE_ROWS:
            rows.append([label, sl_label] + [perf[m][sl].get(key) for m in models])
    return header, rows


def importance_rows(imp: dict, k: int = TOP_IMPORTANCE) -> tuple[list[str], list[list]]:
    header = ["method", "row"] + [str(r) for r in range(1, k + 1)]
    rows = []
    for method, label in (("correlation", "Correlation"), ("lasso", "LASSO"), ("forest", "Random Forest")):
        top = imp[method][:k]
        rows.append([label, "data feature"] + [e["feature"] for e in top])
        rows.append([label, "time step"] + [e["offset"] for e in top])
        rows.append([label, "importance"] + [e["importance"] for e in top])
    return header, rows


def clustering_summary_rows(test2: dict, level: str) -> tuple[list[str], list[list]]:
    header = ["algorithm", "scaler"]
    for ms in MEASURES:
        header += [f"{ms}_silhouette", f"{ms}_largest_fraction", f"{ms}_clusters", f"{ms}_noise_fraction"]
    index = {(r["level"], r["measure"], r["scaler"], r["algorithm"]): r["best"] for r in test2["per_combination_best"]}
    rows = []
    for algo in ("kmeans", "dbscan"):
        for sc in preprocess.SCALER_KINDS:
            row = [algo, sc]
            present = False
            for ms in MEASURES:
                best = index.get((level, ms, sc, algo))
                present |= (level, ms, sc, algo) in index
                if best is None:
                    row += [None] * 4
                else:
                    row += [best["silhouette"], best["largest_fraction"], best["clusters"], best["noise_fraction"]]
            if present:
                rows.append(row)
    return header, rows


def write_outputs(out_dir, full_report: dict, combos: Sequence[Combination] = ()) -> list[Path]:
    out = Path(out_dir)
    tables = out / "tables"
    charts = out / "charts"
    written = [report.write_json(out / "report.json", full_report)]

    t1 = full_report.get("test1")
    if t1:
        written.append(report.write_csv(tables / "table4_test1_performance.csv", *performance_rows(t1["performance"])))
        for name, fname in (
            ("random_forest_classifier", "table5_forest_classifier_top5.csv"),
            ("random_forest_regressor", "table6_forest_regressor_top5.csv"),
        ):
            rows = [[e["rank"], e["label"], e["feature"], e["offset"], e["importance"]] for e in t1["forest_importance"][name]]
            written.append(report.write_csv(tables / fname, ["rank", "feature_at_time", "feature", "offset", "importance"], rows))
        s = t1["series"]
        svg = report.line_chart(
            {"actual": s["actual_scaled"], "forest regressor": s["forest_regressor_scaled"], "LASSO": s["lasso_scaled"]},
            "Test 1: scaled TR inflow, actual vs predicted",
            x_labels=s["periods"],
            vlines=[(t1["dataset"]["train_rows"], "test split")],
        )
        written.append(report.write_text(charts / "test1_actual_vs_predicted.svg", svg))

    t2 = full_report.get("test2")
    if t2:
        written.append(report.write_csv(tables / "table7_clustering_system.csv", *clustering_summary_rows(t2, "system")))
        written.append(report.write_csv(tables / "table8_clustering_subsystem.csv", *clustering_summary_rows(t2, "subsystem")))
        grid_header = ["min_pts", "eps", "silhouette", "clusters", "largest_fraction", "noise_fraction"]
        km_header = ["k", "silhouette", "clusters", "largest_fraction", "inertia"]
        for c in combos:
            rows = [
                [cfg.min_pts, cfg.eps, m.silhouette, m.cluster_count, m.largest_fraction, m.noise_fraction]
                for cfg, m in c.dbscan
            ]
            written.append(report.write_csv(tables / "grids" / f"dbscan_{c.key}.csv", grid_header, rows))
            rows = [[m.params.get("k"), m.silhouette, m.cluster_count, m.largest_fraction, m.inertia] for m in c.kmeans]
            written.append(report.write_csv(tables / "grids" / f"kmeans_{c.key}.csv", km_header, rows))

    t3 = full_report.get("test3")
    if t3:
        written.append(report.write_csv(tables / "table14_test3_performance.csv", *performance_rows(t3["performance"]["total"])))
        names = {"total": "table11_importance_total.csv"}
        for i, k in enumerate(sorted(k for k in t3["importance"] if k != "total")):
            names[k] = f"table{12 + i}_importance_{k}.csv" if i < 2 else f"importance_{k}.csv"
        for k, fname in names.items():
            written.append(report.write_csv(tables / fname, *importance_rows(t3["importance"][k])))
        for k, perf in t3["performance"].items():
            if k != "total":
                written.append(report.write_csv(tables / f"test3_performance_{k}.csv", *performance_rows(perf)))
        keys = ("mae", "mse", "r2", "f1")
        rows = []
        for a in t3["ablation"]:
            m, d = a["metrics"]["test"], a["delta_vs_baseline"]["test"]
            rows.append([a["removed"], a["learner"]] + [m.get(k) for k in keys] + [d.get(k) for k in keys])
        header = ["removed_cluster", "learner"] + [f"test_{k}" for k in keys] + [f"delta_{k}" for k in keys]
        written.append(report.write_csv(tables / "ablation.csv", header, rows))

    fig = full_report.get("inflow_curve")
    if fig:
        written.append(
            report.write_text(
                charts / "cumulative_inflow.svg",
                report.line_chart(
                    {"cumulative %": fig["cumulative_pct"]},
                    f"Cumulative TR inflow, release {fig['release_id']}",
                    x_labels=fig["dates"],
                    x_values=fig["day_offsets"],
                    vlines=[(0, "release"), (corpus.EARLY_POST_DAYS, "+122 days")],
                ),
            )
        )
    return written


def inflow_curve_summary(bundle: corpus.CorpusBundle) -> dict:
    """Curve for the release with the most reports plus pooled fractions."""
    per = {}
    for t in bundle.trouble_reports:
        per[t.release_id] = per.get(t.release_id, 0) + 1
    if not per:
        return {}
    rid = min(per, key=lambda r: (-per[r], r))
    c = corpus.cumulative_inflow_curve(bundle, rid)
    return {
        "release_id": rid,
        "dates": [d.isoformat() for d in c.dates],
        "day_offsets": [(d - c.release_date).days for d in c.dates],
        "cumulative_pct": list(c.cumulative_pct),
        "pre_release_fraction": c.pre_release_fraction,
        "early_post_fraction": c.early_post_fraction,
        "pooled": corpus.pooled_inflow_statistics(bundle),
    }


def _ground_truth(config: RunConfig):
    path = config.resolved_corpus_dir() / synth.GROUND_TRUTH_FILE
    return synth.load_ground_truth(path.parent) if path.exists() else None


def _header(config: RunConfig, bundle) -> dict:
    return {"config": config.to_dict(), "corpus": bundle.summary(), "notes": NOTES}


def cmd_test1(config: RunConfig) -> dict:
    bundle = load_prepared(config)
    rep = _header(config, bundle) | {"test1": run_test1(config, bundle)}
    write_outputs(config.out_dir, rep)
    return rep


def cmd_test2(config: RunConfig):
    bundle = load_prepared(config)
    t2, combos, winner, assignments = run_test2(config, bundle, _ground_truth(config))
    rep = _header(config, bundle) | {"test2": t2}
    write_outputs(config.out_dir, rep, combos)
    return rep, winner, assignments


def cmd_test3(config: RunConfig, assignments: dict[str, int] | None = None) -> dict:
    """Runs Test 2 first when no cluster assignments are supplied."""
    bundle = load_prepared(config)
    if assignments is None:
        _, _, _, assignments = run_test2(config, bundle)
    rep = _header(config, bundle) | {"test3": run_test3(config, bundle, assignments)}
    write_outputs(config.out_dir, rep)
    return rep


def cmd_all(config: RunConfig) -> dict:
    bundle = load_prepared(config)
    gt = _ground_truth(config)
    rep = _header(config, bundle)
    rep["inflow_curve"] = inflow_curve_summary(bundle)
    rep["test1"] = run_test1(config, bundle)
    t2, combos, winner, assignments = run_test2(config, bundle, gt)
    rep["test2"] = t2
    rep["test3"] = run_test3(config, bundle, assignments)
    if gt is not None:
        causal = t2.get("ground_truth", {}).get("causal_cluster")
        top3 = rep["test3"]["importance"]["total"]["forest"][:3]
        rep["test3"]["causal_cluster_in_forest_top3"] = any(
            e["feature"] == dataset.cluster_field(causal) for e in top3
        ) if causal is not None else False
    write_outputs(config.out_dir, rep, combos)
    return rep


def load_config_file(path, base: RunConfig) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise InvalidConfig("config file must hold a JSON object")
    return RunConfig.from_dict(doc, base)
