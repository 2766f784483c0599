"""Independent reference implementations used as test oracles.

Each routine is written from the textbook definition with plain loops, sharing
no code with the package under test.
"""

from __future__ import annotations

import math
from collections import deque
from datetime import date, timedelta

from inflowkit.corpus import CommitRecord, CorpusBundle, FeatureRecord, Release, TroubleReport


def category_oracle(x: float) -> int:
    # left-open, right-closed intervals; the lowest class is closed at -15
    bounds = [(-math.inf, -15, 1), (-15, -5, 2), (-5, 5, 3), (5, 15, 4), (15, 30, 5)]
    for lo, hi, cat in bounds:
        if lo < x <= hi or (cat == 1 and x <= hi):
            return cat
    return 6


def dist(p, q) -> float:
    return math.sqrt(sum((a - b) ** 2 for a, b in zip(p, q)))


def silhouette_bruteforce(points, labels) -> float:
    idx = [i for i, l in enumerate(labels) if l != -1]
    clusters = sorted({labels[i] for i in idx})
    if len(clusters) < 2:
        raise ValueError("undefined")
    total = 0.0
    for i in idx:
        own = [j for j in idx if labels[j] == labels[i] and j != i]
        if not own:
            continue  # singleton scores 0
        a = sum(dist(points[i], points[j]) for j in own) / len(own)
        b = math.inf
        for c in clusters:
            if c == labels[i]:
                continue
            members = [j for j in idx if labels[j] == c]
            b = min(b, sum(dist(points[i], points[j]) for j in members) / len(members))
        m = max(a, b)
        total += 0.0 if m == 0 else (b - a) / m
    return total / len(idx)


def dbscan_naive(points, eps: float, min_pts: int) -> list[int]:
    """Sequential DBSCAN: clusters grown by BFS in index order."""
    n = len(points)
    nbrs = [[j for j in range(n) if dist(points[i], points[j]) <= eps] for i in range(n)]
    core = [len(nbrs[i]) >= min_pts for i in range(n)]
    labels = [-1] * n
    cid = 0
    for i in range(n):
        if not core[i] or labels[i] != -1:
            continue
        labels[i] = cid
        queue = deque([i])
        while queue:
            p = queue.popleft()
            if not core[p]:
                continue
            for q in nbrs[p]:
                if labels[q] == -1:
                    labels[q] = cid
                    queue.append(q)
        cid += 1
    return labels


def as_partition(labels) -> tuple[frozenset, frozenset]:
    """(noise set, set of clusters as frozensets) for relabeling-free comparison."""
    groups: dict = {}
    for i, l in enumerate(labels):
        groups.setdefault(int(l), set()).add(i)
    noise = frozenset(groups.pop(-1, set()))
    return noise, frozenset(frozenset(g) for g in groups.values())


def best_two_partition_1d(xs):
    best = None
    n = len(xs)
    for mask in range(1, 2 ** n - 1):
        a = [xs[i] for i in range(n) if mask >> i & 1]
        b = [xs[i] for i in range(n) if not mask >> i & 1]
        ma, mb = sum(a) / len(a), sum(b) / len(b)
        inertia = sum((x - ma) ** 2 for x in a) + sum((x - mb) ** 2 for x in b)
        if best is None or inertia < best[0] - 1e-12:
            best = (inertia, sorted([tuple(sorted(a)), tuple(sorted(b))]), sorted([ma, mb]))
    return best


def percentile_linear(values, q: float) -> float:
    """Linear interpolation between closest ranks (rank = q/100 * (n-1))."""
    s = sorted(values)
    pos = q / 100.0 * (len(s) - 1)
    lo = math.floor(pos)
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (s[hi] - s[lo]) * (pos - lo)


def f1_confusion(pred, true, labels) -> float:
    total = 0.0
    for l in labels:
        tp = sum(1 for p, t in zip(pred, true) if p == l and t == l)
        fp = sum(1 for p, t in zip(pred, true) if p == l and t != l)
        fn = sum(1 for p, t in zip(pred, true) if p != l and t == l)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        total += f1 * sum(1 for t in true if t == l)
    return total / len(true)


def pearson_formula(x, y) -> float:
    n = len(x)
    mx, my = sum(x) / n, sum(y) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(x, y))
    vx = sum((a - mx) ** 2 for a in x)
    vy = sum((b - my) ** 2 for b in y)
    if vx == 0 or vy == 0:
        return 0.0
    return cov / math.sqrt(vx * vy)


def soft(z: float, t: float) -> float:
    return math.copysign(max(abs(z) - t, 0.0), z)


def gini_of(labels) -> float:
    n = len(labels)
    return 1.0 - sum((labels.count(c) / n) ** 2 for c in set(labels))


def best_stump(xs, ys):
    """Exhaustive midpoint search for a one-feature Gini split."""
    uniq = sorted(set(xs))
    best = None
    for lo, hi in zip(uniq, uniq[1:]):
        t = (lo + hi) / 2
        left = [y for x, y in zip(xs, ys) if x <= t]
        right = [y for x, y in zip(xs, ys) if x > t]
        score = (len(left) * gini_of(left) + len(right) * gini_of(right)) / len(ys)
        if best is None or score < best[0] - 1e-12:
            best = (score, t)
    return best


# --------------------------------------------------------------------------
# tiny corpus builders


def make_bundle(
    commits=(),
    trs=(),
    features=(),
    releases=(),
) -> CorpusBundle:
    return CorpusBundle(
        commits=[CommitRecord(*c) for c in commits],
        trouble_reports=[TroubleReport(*t) for t in trs],
        features=[FeatureRecord(*f) for f in features],
        releases=[Release(*r) for r in releases],
    )


def random_bundle(rng, n_features=8, n_commits=50, n_releases=3, n_trs=40, subsystems=6):
    start = date(2021, 1, 1)
    releases = [Release(f"R{k}", start + timedelta(days=60 * (k + 1))) for k in range(n_releases)]
    features = [
        FeatureRecord(f"F{k}", start + timedelta(days=int(rng.integers(0, 60 * n_releases))), int(rng.integers(0, 90)))
        for k in range(n_features)
    ]
    commits = []
    for k in range(n_commits):
        sub = int(rng.integers(0, subsystems))
        commits.append(
            CommitRecord(
                f"C{k}",
                f"F{int(rng.integers(0, n_features))}",
                start + timedelta(days=int(rng.integers(0, 60 * n_releases + 30))),
                f"S{sub % 3}",
                f"S{sub % 3}.{sub}",
                int(rng.integers(0, 6)),
                int(rng.integers(0, 20)),
                int(rng.integers(0, 10)),
                int(rng.integers(0, 10)),
            )
        )
    trs = [
        TroubleReport(
            f"T{k}",
            start + timedelta(days=int(rng.integers(0, 60 * n_releases + 90))),
            f"R{int(rng.integers(0, n_releases))}",
            int(rng.integers(1, 6)),
        )
        for k in range(n_trs)
    ]
    return CorpusBundle(commits, trs, features, releases)

