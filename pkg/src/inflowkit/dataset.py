"""Period tables and lagged supervised datasets.

A :class:`TimeSeriesTable` aggregates the corpus per calendar month or per
release.  :func:`build_lagged` turns it into a design matrix whose columns are
``(field, offset)`` pairs, offset 0 being the period being predicted.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import date
from typing import Literal, Mapping, Sequence

import numpy as np

from .corpus import CorpusBundle
from .errors import EmptyCorpus, TooFewRows, UnknownFeature

Granularity = Literal["month", "release"]
TargetKind = Literal["regression_inflow", "category_1_6", "regression_inflow_class_k"]

IMPORTANCE_CLASSES = (1, 2, 3, 4, 5)
# fields that describe what was delivered in a period; these are known at
# prediction time and may enter the design matrix at offset 0
EXOGENOUS_FIELDS = ("releases_delivered", "features_delivered", "mean_dev_time")


@dataclass(frozen=True)
class PeriodRow:
    period_key: str
    tr_inflow: int
    tr_inflow_by_class: dict[int, int]
    releases_delivered: int
    features_delivered: int
    mean_dev_time: float
    cluster_counts: dict[int, int] = field(default_factory=dict)
    feature_ids: tuple[str, ...] = ()

    @property
    def empty_delivery(self) -> bool:
        # mean_dev_time is a zero fill when nothing was delivered
        return self.features_delivered == 0


@dataclass(frozen=True)
class TimeSeriesTable:
    granularity: Granularity
    rows: tuple[PeriodRow, ...]

    def cluster_ids(self) -> list[int]:
        return sorted({c for r in self.rows for c in r.cluster_counts})

    def field_names(self) -> list[str]:
        names = ["tr_inflow"] + [f"tr_inflow_class_{k}" for k in IMPORTANCE_CLASSES]
        names += list(EXOGENOUS_FIELDS)
        names += [cluster_field(c) for c in self.cluster_ids()]
        return names

    def field_values(self, name: str) -> np.ndarray:
        return np.array([row_value(r, name) for r in self.rows], dtype=float)


def cluster_field(cluster_id: int) -> str:
    return f"cluster_{cluster_id}"


def row_value(row: PeriodRow, name: str) -> float:
    if name == "tr_inflow":
        return row.tr_inflow
    if name.startswith("tr_inflow_class_"):
        return row.tr_inflow_by_class.get(int(name.rsplit("_", 1)[1]), 0)
    if name.startswith("cluster_"):
        return row.cluster_counts.get(int(name[len("cluster_"):]), 0)
    return getattr(row, name)


@dataclass(frozen=True)
class LagConfig:
    lag: int = 4
    include_current_exogenous: bool = True

    def __post_init__(self):
        if self.lag < 1:
            raise ValueError("lag must be >= 1")


@dataclass(frozen=True)
class SupervisedDataset:
    columns: tuple[tuple[str, int], ...]
    X: np.ndarray
    y: np.ndarray
    target_kind: TargetKind
    periods: tuple[str, ...] = ()
    target_class: int | None = None

    @property
    def n_rows(self) -> int:
        return len(self.y)

    def column_labels(self) -> list[str]:
        return [f"{name}@{off}" for name, off in self.columns]

    def drop_columns(self, names: set[str]) -> "SupervisedDataset":
        keep = [j for j, (n, _) in enumerate(self.columns) if n not in names]
        return dataclasses.replace(
            self,
            columns=tuple(self.columns[j] for j in keep),
            X=self.X[:, keep],
        )

    def take(self, rows: slice) -> "SupervisedDataset":
        return dataclasses.replace(
            self,
            X=self.X[rows],
            y=self.y[rows],
            periods=self.periods[rows] if self.periods else (),
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["period"] + self.column_labels() + ["y"])
            for i in range(self.n_rows):
                period = self.periods[i] if self.periods else str(i)
                w.writerow([period] + [repr(float(v)) for v in self.X[i]] + [repr(float(self.y[i]))])


# --------------------------------------------------------------------------
# aggregation


def _month_key(d: date) -> tuple[int, int]:
    return d.year, d.month


def _month_range(lo: tuple[int, int], hi: tuple[int, int]) -> list[tuple[int, int]]:
    out = []
    y, m = lo
    while (y, m) <= hi:
        out.append((y, m))
        m += 1
        if m > 12:
            y, m = y + 1, 1
    return out


def _make_row(key: str, trs, feats, n_releases: int) -> PeriodRow:
    by_class = Counter(t.importance_class for t in trs)
    dev = [f.development_time_days for f in feats]
    return PeriodRow(
        period_key=key,
        tr_inflow=len(trs),
        tr_inflow_by_class={k: by_class.get(k, 0) for k in IMPORTANCE_CLASSES},
        releases_delivered=n_releases,
        features_delivered=len(feats),
        mean_dev_time=float(np.mean(dev)) if dev else 0.0,
        feature_ids=tuple(f.feature_id for f in feats),
    )


def aggregate_periods(bundle: CorpusBundle, granularity: Granularity = "month") -> TimeSeriesTable:
    """Aggregate trouble reports and delivered features per period.

    Month mode counts reports by ``date_reported`` and features by the date
    of the release they were linked to; missing months are zero-filled.
    Release mode groups everything by release id in release order.
    """
    if not bundle.trouble_reports and not bundle.features:
        raise EmptyCorpus("corpus has neither trouble reports nor features")
    releases = bundle.ordered_releases()
    rel_by_id = bundle.release_by_id()
    # unlinked bundles fall back to completion dates for delivery
    delivered = [f for f in bundle.features if not bundle.linked or f.release_id is not None]

    if granularity == "release":
        trs_by = defaultdict(list)
        for t in bundle.trouble_reports:
            trs_by[t.release_id].append(t)
        feats_by = defaultdict(list)
        for f in delivered:
            if f.release_id is not None:
                feats_by[f.release_id].append(f)
        rows = tuple(
            _make_row(r.release_id, trs_by.get(r.release_id, []), feats_by.get(r.release_id, []), 1)
            for r in releases
        )
        if not rows:
            raise EmptyCorpus("corpus has no releases")
        return TimeSeriesTable("release", rows)

    if granularity != "month":
        raise ValueError(f"unknown granularity {granularity!r}")

    def delivery_date(f) -> date:
        if f.release_id is not None:
            return rel_by_id[f.release_id].release_date
        return f.completion_date

    trs_by = defaultdict(list)
    for t in bundle.trouble_reports:
        trs_by[_month_key(t.date_reported)].append(t)
    feats_by = defaultdict(list)
    for f in delivered:
        feats_by[_month_key(delivery_date(f))].append(f)
    rels_by = Counter(_month_key(r.release_date) for r in releases)
    keys = set(trs_by) | set(feats_by)
    if not keys:
        raise EmptyCorpus("nothing to aggregate")
    rows = tuple(
        _make_row(f"{y:04d}-{m:02d}", trs_by.get((y, m), []), feats_by.get((y, m), []), rels_by.get((y, m), 0))
        for y, m in _month_range(min(keys), max(keys))
    )
    return TimeSeriesTable("month", rows)


def augment_with_clusters(table: TimeSeriesTable, assignments: Mapping[str, int]) -> TimeSeriesTable:
    """Count, per period, the delivered features that fall in each cluster.

    Features delivered but absent from ``assignments`` are not counted.
    """
    known = {fid for r in table.rows for fid in r.feature_ids}
    for fid in assignments:
        if fid not in known:
            raise UnknownFeature(fid)
    rows = []
    for r in table.rows:
        counts = Counter(assignments[f] for f in r.feature_ids if f in assignments)
        rows.append(dataclasses.replace(r, cluster_counts=dict(sorted(counts.items()))))
    return dataclasses.replace(table, rows=tuple(rows))


# --------------------------------------------------------------------------
# categories


def categorize_delta(current_inflow: float, previous_inflow: float) -> int:
    """Map the month-over-month inflow change to a category 1..6.

    Intervals are left-open and right-closed: (30, inf) -> 6, (15, 30] -> 5,
    (5, 15] -> 4, (-5, 5] -> 3, (-15, -5] -> 2 and (-inf, -15] -> 1.
    """
    x = current_inflow - previous_inflow
    if math.isnan(x):
        raise ValueError("inflow difference is NaN")
    if x > 30:
        return 6
    if x > 15:
        return 5
    if x > 5:
        return 4
    if x > -5:
        return 3
    if x > -15:
        return 2
    return 1


# --------------------------------------------------------------------------
# lagging


def predictor_columns(table: TimeSeriesTable, config: LagConfig) -> list[tuple[str, int]]:
    fields = table.field_names()
    base = [f for f in fields if not f.startswith("cluster_")]
    clusters = [f for f in fields if f.startswith("cluster_")]
    cols = [(f, -k) for f in base for k in range(1, config.lag + 1)]
    cols += [(f, -k) for f in clusters for k in range(1, config.lag + 1)]
    if config.include_current_exogenous:
        cols += [(f, 0) for f in EXOGENOUS_FIELDS]
        cols += [(f, 0) for f in clusters]
    return cols


def target_vector(table: TimeSeriesTable, target_kind: TargetKind, class_k: int | None = None) -> np.ndarray:
    """Target per period for every row of the table (not yet lag-aligned)."""
    inflow = table.field_values("tr_inflow")
    if target_kind == "regression_inflow":
        return inflow
    if target_kind == "category_1_6":
        cats = np.zeros(len(inflow))
        cats[1:] = [categorize_delta(inflow[i], inflow[i - 1]) for i in range(1, len(inflow))]
        return cats
    if target_kind == "regression_inflow_class_k":
        if class_k not in IMPORTANCE_CLASSES:
            raise ValueError(f"importance class must be in 1..5, got {class_k!r}")
        return table.field_values(f"tr_inflow_class_{class_k}")
    raise ValueError(f"unknown target kind {target_kind!r}")


def build_lagged(
    table: TimeSeriesTable,
    config: LagConfig = LagConfig(),
    target_kind: TargetKind = "regression_inflow",
    class_k: int | None = None,
) -> SupervisedDataset:
    """Design matrix of lagged period fields; the first ``lag`` periods only feed lags."""
    n = len(table.rows)
    if n <= config.lag:
        raise TooFewRows(config.lag + 1, n)
    cols = predictor_columns(table, config)
    values = {name: table.field_values(name) for name in {c[0] for c in cols}}
    idx = np.arange(config.lag, n)
    X = np.empty((len(idx), len(cols)))
    for j, (name, off) in enumerate(cols):
        X[:, j] = values[name][idx + off]
    y = target_vector(table, target_kind, class_k)[idx]
    return SupervisedDataset(
        columns=tuple(cols),
        X=X,
        y=y,
        target_kind=target_kind,
        periods=tuple(table.rows[i].period_key for i in idx),
        target_class=class_k if target_kind == "regression_inflow_class_k" else None,
    )


def per_class_target(table: TimeSeriesTable, class_k: int, lag: int = 0) -> np.ndarray:
    """Inflow of one importance class per period, aligned with ``build_lagged`` rows."""
    if class_k not in IMPORTANCE_CLASSES:
        raise ValueError(f"importance class must be in 1..5, got {class_k!r}")
    return table.field_values(f"tr_inflow_class_{class_k}")[lag:]


def chronological_split(dataset: SupervisedDataset, test_fraction: float = 0.2):
    """Last ``ceil(rows * test_fraction)`` rows become the test set; no shuffling."""
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    n = dataset.n_rows
    n_test = math.ceil(n * test_fraction)
    if n < 2 or n_test >= n:
        raise TooFewRows(2, n)
    cut = n - n_test
    return dataset.take(slice(0, cut)), dataset.take(slice(cut, n))


def split_index(n_rows: int, test_fraction: float) -> int:
    return n_rows - math.ceil(n_rows * test_fraction)


def drop_cluster_columns(dataset: SupervisedDataset, cluster_ids: Sequence[int] | None = None) -> SupervisedDataset:
    if cluster_ids is None:
        names = {n for n, _ in dataset.columns if n.startswith("cluster_")}
    else:
        names = {cluster_field(c) for c in cluster_ids}
    return dataset.drop_columns(names)
