"""Corpus data model: commits, trouble reports, software features and releases.

Corpora arrive as four CSV files (plus an optional feature id map).  Loading
validates every row; the linking and consolidation steps return new bundles
and never mutate their input.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import os
from bisect import bisect_left
from collections import Counter
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np

from .errors import (
    DanglingReference,
    DuplicateKey,
    NoReports,
    ParseError,
    UnknownRelease,
)

log = logging.getLogger(__name__)

SINGLE_GROUP = "Single Group"
CONSOLIDATION_THRESHOLD = 13
EARLY_POST_DAYS = 122

Level = Literal["system", "subsystem"]
Measure = Literal["files", "loc"]

COMMIT_COLUMNS = (
    "commit_id",
    "feature_id",
    "date",
    "system",
    "subsystem",
    "files_changed",
    "loc_added",
    "loc_removed",
    "loc_modified",
)
TR_COLUMNS = ("tr_id", "date_reported", "release_id", "importance_class")
FEATURE_COLUMNS = ("feature_id", "completion_date", "development_time_days")
RELEASE_COLUMNS = ("release_id", "release_date")
MAP_COLUMNS = ("feature_data_id", "commit_data_id")

CORPUS_FILES = {
    "commits": "commits.csv",
    "trouble_reports": "trouble_reports.csv",
    "features": "features.csv",
    "releases": "releases.csv",
}


@dataclass(frozen=True)
class CommitRecord:
    commit_id: str
    feature_id: str
    date: date
    system: str
    subsystem: str
    files_changed: int
    loc_added: int
    loc_removed: int
    loc_modified: int

    @property
    def loc(self) -> int:
        return self.loc_added + self.loc_removed + self.loc_modified


@dataclass(frozen=True)
class TroubleReport:
    tr_id: str
    date_reported: date
    release_id: str
    importance_class: int


@dataclass(frozen=True)
class FeatureRecord:
    feature_id: str
    completion_date: date
    development_time_days: int
    release_id: str | None = None


@dataclass(frozen=True)
class Release:
    release_id: str
    release_date: date


@dataclass(frozen=True)
class CorpusBundle:
    """The four linked data subsets.

    ``linked`` becomes true after :func:`link_features_to_releases`; from then
    on a feature whose ``release_id`` is ``None`` is unreleased.
    """

    commits: tuple[CommitRecord, ...]
    trouble_reports: tuple[TroubleReport, ...]
    features: tuple[FeatureRecord, ...]
    releases: tuple[Release, ...]
    linked: bool = False

    def __post_init__(self):
        # accept lists from callers but store tuples so the bundle stays immutable
        for name in ("commits", "trouble_reports", "features", "releases"):
            value = getattr(self, name)
            if not isinstance(value, tuple):
                object.__setattr__(self, name, tuple(value))

    def ordered_releases(self) -> list[Release]:
        return sorted(self.releases, key=lambda r: (r.release_date, r.release_id))

    def release_by_id(self) -> dict[str, Release]:
        return {r.release_id: r for r in self.releases}

    def feature_by_id(self) -> dict[str, FeatureRecord]:
        return {f.feature_id: f for f in self.features}

    def orphan_commits(self) -> list[CommitRecord]:
        known = {f.feature_id for f in self.features}
        return [c for c in self.commits if c.feature_id not in known]

    def unreleased_features(self) -> list[str]:
        if not self.linked:
            return []
        return [f.feature_id for f in self.features if f.release_id is None]

    def summary(self) -> dict[str, int]:
        return {
            "commits": len(self.commits),
            "trouble_reports": len(self.trouble_reports),
            "features": len(self.features),
            "releases": len(self.releases),
        }


@dataclass(frozen=True)
class FeatureFootprint:
    feature_id: str
    level: Level
    measure: Measure
    vector: dict[str, float] = field(default_factory=dict)


# --------------------------------------------------------------------------
# parsing helpers


def _parse_date(raw: str, row: int, column: str, path: str | None) -> date:
    try:
        return date.fromisoformat(raw.strip())
    except ValueError:
        raise ParseError(row, column, f"not an ISO-8601 date: {raw!r}", path) from None


def _parse_count(raw: str, row: int, column: str, path: str | None) -> int:
    try:
        value = int(raw.strip())
    except ValueError:
        raise ParseError(row, column, f"not an integer: {raw!r}", path) from None
    if value < 0:
        raise ParseError(row, column, f"negative count {value}", path)
    return value


def _parse_id(raw: str, row: int, column: str, path: str | None) -> str:
    value = raw.strip()
    if not value:
        raise ParseError(row, column, "empty identifier", path)
    return value


def _read_rows(path: str | os.PathLike, columns: Sequence[str]) -> Iterable[tuple[int, dict]]:
    path_s = str(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in columns if c not in header]
        if missing:
            raise ParseError(0, missing[0], "missing header column", path_s)
        # data rows numbered from 1; the header is row 0
        for i, raw in enumerate(reader, start=1):
            if None in raw or any(raw.get(c) is None for c in columns):
                raise ParseError(i, "", "wrong number of fields", path_s)
            yield i, raw


def _read_commits(path) -> list[CommitRecord]:
    p = str(path)
    out = []
    for i, r in _read_rows(path, COMMIT_COLUMNS):
        out.append(
            CommitRecord(
                commit_id=_parse_id(r["commit_id"], i, "commit_id", p),
                feature_id=_parse_id(r["feature_id"], i, "feature_id", p),
                date=_parse_date(r["date"], i, "date", p),
                system=_parse_id(r["system"], i, "system", p),
                subsystem=_parse_id(r["subsystem"], i, "subsystem", p),
                files_changed=_parse_count(r["files_changed"], i, "files_changed", p),
                loc_added=_parse_count(r["loc_added"], i, "loc_added", p),
                loc_removed=_parse_count(r["loc_removed"], i, "loc_removed", p),
                loc_modified=_parse_count(r["loc_modified"], i, "loc_modified", p),
            )
        )
    return out


def _read_trouble_reports(path) -> list[TroubleReport]:
    p = str(path)
    out = []
    for i, r in _read_rows(path, TR_COLUMNS):
        cls = _parse_count(r["importance_class"], i, "importance_class", p)
        if not 1 <= cls <= 5:
            raise ParseError(i, "importance_class", f"class {cls} outside 1..5", p)
        out.append(
            TroubleReport(
                tr_id=_parse_id(r["tr_id"], i, "tr_id", p),
                date_reported=_parse_date(r["date_reported"], i, "date_reported", p),
                release_id=_parse_id(r["release_id"], i, "release_id", p),
                importance_class=cls,
            )
        )
    return out


def _read_features(path) -> list[FeatureRecord]:
    p = str(path)
    return [
        FeatureRecord(
            feature_id=_parse_id(r["feature_id"], i, "feature_id", p),
            completion_date=_parse_date(r["completion_date"], i, "completion_date", p),
            development_time_days=_parse_count(
                r["development_time_days"], i, "development_time_days", p
            ),
        )
        for i, r in _read_rows(path, FEATURE_COLUMNS)
    ]


def _read_releases(path) -> list[Release]:
    p = str(path)
    return [
        Release(
            release_id=_parse_id(r["release_id"], i, "release_id", p),
            release_date=_parse_date(r["release_date"], i, "release_date", p),
        )
        for i, r in _read_rows(path, RELEASE_COLUMNS)
    ]


def _read_id_map(path) -> dict[str, str]:
    p = str(path)
    mapping: dict[str, str] = {}
    for i, r in _read_rows(path, MAP_COLUMNS):
        src = _parse_id(r["feature_data_id"], i, "feature_data_id", p)
        if src in mapping:
            raise DuplicateKey("feature_id_map", src)
        mapping[src] = _parse_id(r["commit_data_id"], i, "commit_data_id", p)
    return mapping


def _check_unique(kind: str, keys: Iterable[str]) -> None:
    seen: set[str] = set()
    for k in keys:
        if k in seen:
            raise DuplicateKey(kind, k)
        seen.add(k)


def validate_bundle(bundle: CorpusBundle) -> CorpusBundle:
    """Check key uniqueness and TR release references.

    Commits whose feature is unknown are tolerated and logged as orphans.
    """
    _check_unique("commit", (c.commit_id for c in bundle.commits))
    _check_unique("trouble_report", (t.tr_id for t in bundle.trouble_reports))
    _check_unique("feature", (f.feature_id for f in bundle.features))
    _check_unique("release", (r.release_id for r in bundle.releases))
    releases = {r.release_id for r in bundle.releases}
    for tr in bundle.trouble_reports:
        if tr.release_id not in releases:
            raise DanglingReference("trouble_report", tr.release_id, owner=tr.tr_id)
    for f in bundle.features:
        if f.release_id is not None and f.release_id not in releases:
            raise DanglingReference("feature", f.release_id, owner=f.feature_id)
    orphans = bundle.orphan_commits()
    if orphans:
        log.warning("%d commits reference unknown features", len(orphans))
    return bundle


def load_corpus(
    commit_path,
    tr_path,
    feature_path,
    release_path,
    id_map_path=None,
) -> CorpusBundle:
    """Read and validate the four corpus files.

    When ``id_map_path`` is given, feature ids in the feature file are
    translated to the ids used by the commit file.
    """
    commits = _read_commits(commit_path)
    trs = _read_trouble_reports(tr_path)
    features = _read_features(feature_path)
    releases = _read_releases(release_path)
    if id_map_path is not None:
        mapping = _read_id_map(id_map_path)
        translated = []
        for f in features:
            if f.feature_id not in mapping:
                raise DanglingReference("feature_id_map", f.feature_id)
            translated.append(dataclasses.replace(f, feature_id=mapping[f.feature_id]))
        features = translated
    return validate_bundle(CorpusBundle(commits, trs, features, releases))


def load_corpus_dir(directory) -> CorpusBundle:
    d = Path(directory)
    id_map = d / "feature_id_map.csv"
    return load_corpus(
        d / CORPUS_FILES["commits"],
        d / CORPUS_FILES["trouble_reports"],
        d / CORPUS_FILES["features"],
        d / CORPUS_FILES["releases"],
        id_map if id_map.exists() else None,
    )


def save_corpus(bundle: CorpusBundle, directory) -> list[Path]:
    """Write the bundle as the four CSV files; returns the written paths.

    Derived release links are not persisted; they are recomputed on load.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    tables = {
        "commits": (
            COMMIT_COLUMNS,
            (
                (c.commit_id, c.feature_id, c.date.isoformat(), c.system, c.subsystem,
                 c.files_changed, c.loc_added, c.loc_removed, c.loc_modified)
                for c in bundle.commits
            ),
        ),
        "trouble_reports": (
            TR_COLUMNS,
            (
                (t.tr_id, t.date_reported.isoformat(), t.release_id, t.importance_class)
                for t in bundle.trouble_reports
            ),
        ),
        "features": (
            FEATURE_COLUMNS,
            (
                (f.feature_id, f.completion_date.isoformat(), f.development_time_days)
                for f in bundle.features
            ),
        ),
        "releases": (
            RELEASE_COLUMNS,
            ((r.release_id, r.release_date.isoformat()) for r in bundle.releases),
        ),
    }
    written = []
    for kind, (header, rows) in tables.items():
        path = d / CORPUS_FILES[kind]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        written.append(path)
    return written


# --------------------------------------------------------------------------
# linking and consolidation


def last_commit_dates(bundle: CorpusBundle) -> dict[str, date]:
    last: dict[str, date] = {}
    for c in bundle.commits:
        prev = last.get(c.feature_id)
        if prev is None or c.date > prev:
            last[c.feature_id] = c.date
    return last


def link_features_to_releases(bundle: CorpusBundle) -> CorpusBundle:
    """Attach each feature to the first release dated on or after its last commit.

    Features without commits fall back to their completion date.  Features
    newer than every release keep ``release_id=None`` (unreleased).
    """
    ordered = bundle.ordered_releases()
    dates = [r.release_date for r in ordered]
    last = last_commit_dates(bundle)
    linked = []
    for f in bundle.features:
        anchor = last.get(f.feature_id, f.completion_date)
        i = bisect_left(dates, anchor)
        rid = ordered[i].release_id if i < len(ordered) else None
        linked.append(dataclasses.replace(f, release_id=rid))
    n_unreleased = sum(f.release_id is None for f in linked)
    if n_unreleased:
        log.info("%d features are newer than every release", n_unreleased)
    return dataclasses.replace(bundle, features=tuple(linked), linked=True)


def subsystem_counts(bundle: CorpusBundle) -> Counter:
    return Counter(c.subsystem for c in bundle.commits)


def consolidate_rare_subsystems(
    bundle: CorpusBundle, threshold: int = CONSOLIDATION_THRESHOLD
) -> CorpusBundle:
    """Rename subsystems with fewer than ``threshold`` commit rows to "Single Group"."""
    counts = subsystem_counts(bundle)
    rare = {name for name, n in counts.items() if n < threshold and name != SINGLE_GROUP}
    if not rare:
        return bundle
    commits = tuple(
        dataclasses.replace(c, subsystem=SINGLE_GROUP) if c.subsystem in rare else c
        for c in bundle.commits
    )
    return dataclasses.replace(bundle, commits=commits)


# --------------------------------------------------------------------------
# footprints


def build_footprints(bundle: CorpusBundle, level: Level, measure: Measure) -> list[FeatureFootprint]:
    """Per-feature change magnitude by system or subsystem.

    ``files`` sums files_changed; ``loc`` sums added + removed + modified lines.
    Unreleased features (on a linked bundle), orphan commits and all-zero
    footprints are skipped.
    """
    if level not in ("system", "subsystem"):
        raise ValueError(f"unknown level {level!r}")
    if measure not in ("files", "loc"):
        raise ValueError(f"unknown measure {measure!r}")
    features = bundle.feature_by_id()
    acc: dict[str, dict[str, float]] = {}
    for c in bundle.commits:
        f = features.get(c.feature_id)
        if f is None or (bundle.linked and f.release_id is None):
            continue
        unit = c.system if level == "system" else c.subsystem
        amount = c.files_changed if measure == "files" else c.loc
        vec = acc.setdefault(c.feature_id, {})
        vec[unit] = vec.get(unit, 0) + amount
    out = []
    empty = 0
    for f in bundle.features:
        vec = acc.get(f.feature_id)
        if vec is None:
            continue
        if not any(v > 0 for v in vec.values()):
            empty += 1
            continue
        out.append(FeatureFootprint(f.feature_id, level, measure, vec))
    if empty:
        log.info("skipped %d features with an all-zero %s/%s footprint", empty, level, measure)
    return out


def footprint_matrix(footprints: Sequence[FeatureFootprint]) -> tuple[list[str], list[str], np.ndarray]:
    """Dense (features x units) matrix; units sorted by name, missing entries 0."""
    units = sorted({u for fp in footprints for u in fp.vector})
    col = {u: j for j, u in enumerate(units)}
    X = np.zeros((len(footprints), len(units)))
    for i, fp in enumerate(footprints):
        for u, v in fp.vector.items():
            X[i, col[u]] = v
    return [fp.feature_id for fp in footprints], units, X


# --------------------------------------------------------------------------
# cumulative inflow


@dataclass(frozen=True)
class InflowCurve:
    release_id: str
    release_date: date
    dates: tuple[date, ...]
    cumulative_pct: tuple[float, ...]
    total: int
    pre_release: int
    post_release: int
    early_post: int

    @property
    def pre_release_fraction(self) -> float:
        return self.pre_release / self.total

    @property
    def early_post_fraction(self) -> float | None:
        if self.post_release == 0:
            return None
        return self.early_post / self.post_release


def cumulative_inflow_curve(
    bundle: CorpusBundle, release_id: str, early_days: int = EARLY_POST_DAYS
) -> InflowCurve:
    """Daily cumulative share of a release's trouble reports.

    A report dated strictly before the release date counts as pre-release;
    a post-release report is early when it arrives within ``early_days`` days.
    """
    rel = bundle.release_by_id().get(release_id)
    if rel is None:
        raise UnknownRelease(release_id)
    reported = [t.date_reported for t in bundle.trouble_reports if t.release_id == release_id]
    if not reported:
        raise NoReports(release_id)
    per_day = Counter(reported)
    first, last = min(per_day), max(per_day)
    n_days = (last - first).days + 1
    dates = tuple(first + timedelta(days=k) for k in range(n_days))
    counts = np.array([per_day.get(d, 0) for d in dates])
    total = len(reported)
    cum = np.cumsum(counts)
    pct = tuple(100.0 * cum / total)
    # the last cumulative count equals total, so pct[-1] is exactly 100.0
    pre = sum(1 for d in reported if d < rel.release_date)
    post_offsets = [(d - rel.release_date).days for d in reported if d >= rel.release_date]
    early = sum(1 for k in post_offsets if k <= early_days)
    return InflowCurve(
        release_id=release_id,
        release_date=rel.release_date,
        dates=dates,
        cumulative_pct=pct,
        total=total,
        pre_release=pre,
        post_release=len(post_offsets),
        early_post=early,
    )


def pooled_inflow_statistics(bundle: CorpusBundle, early_days: int = EARLY_POST_DAYS) -> dict:
    """Pre-release and early-post fractions pooled over every release with reports."""
    with_reports = sorted({t.release_id for t in bundle.trouble_reports})
    pre = post = early = total = 0
    for rid in with_reports:
        c = cumulative_inflow_curve(bundle, rid, early_days)
        pre += c.pre_release
        post += c.post_release
        early += c.early_post
        total += c.total
    return {
        "releases": len(with_reports),
        "trouble_reports": total,
        "pre_release_fraction": pre / total if total else None,
        "early_post_fraction": early / post if post else None,
    }


def prepare(bundle: CorpusBundle, threshold: int = CONSOLIDATION_THRESHOLD) -> CorpusBundle:
    """Link features to releases and consolidate rare subsystems."""
    return consolidate_rare_subsystems(link_features_to_releases(bundle), threshold)

