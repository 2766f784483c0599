"""k-means, DBSCAN, silhouette scoring and clustering model selection."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist, squareform

from .errors import NoFeasibleCandidate, TooFewPoints, UndefinedScore

log = logging.getLogger(__name__)

NOISE = -1
DEFAULT_MIN_PTS = tuple(range(5, 21))
DEFAULT_EPS = tuple(k / 10 for k in range(1, 16))
DEFAULT_K_RANGE = tuple(range(2, 11))


@dataclass(frozen=True)
class KMeansConfig:
    k: int
    n_init: int = 10
    max_iter: int = 300
    tol: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.k < 1 or self.n_init < 1 or self.max_iter < 1:
            raise ValueError("k, n_init and max_iter must be positive")


@dataclass(frozen=True)
class DbscanConfig:
    eps: float
    min_pts: int

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.min_pts < 1:
            raise ValueError("min_pts must be >= 1")


@dataclass(frozen=True)
class SelectionPolicy:
    max_clusters: int = 30
    min_clusters: int = 2
    max_largest_fraction: float = 0.95
    # 1.0 disables the gate; silhouette ignores noise, so a near-all-noise
    # labeling of a few tight pockets can otherwise score close to 1
    max_noise_fraction: float = 1.0

    def __post_init__(self):
        if self.min_clusters > self.max_clusters:
            raise ValueError("min_clusters must not exceed max_clusters")
        if not 0.0 <= self.max_noise_fraction <= 1.0:
            raise ValueError("max_noise_fraction must lie in [0, 1]")


@dataclass
class ClusterModel:
    algorithm: str
    labels: np.ndarray
    cluster_count: int
    largest_fraction: float
    noise_fraction: float
    silhouette: float | None = None
    centers: np.ndarray | None = None
    inertia: float | None = None
    inertia_trace: list[float] = field(default_factory=list)
    degenerate: bool = False
    params: dict = field(default_factory=dict)

    @property
    def silhouette_defined(self) -> bool:
        return self.silhouette is not None

    def assignments(self, ids: Sequence[str]) -> dict[str, int]:
        return {fid: int(c) for fid, c in zip(ids, self.labels)}

    def summary(self) -> dict:
        d = {
            "algorithm": self.algorithm,
            "clusters": self.cluster_count,
            "largest_fraction": self.largest_fraction,
            "noise_fraction": self.noise_fraction,
            "silhouette": self.silhouette,
        }
        d.update(self.params)
        return d


def _points(points) -> np.ndarray:
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or len(X) == 0:
        raise TooFewPoints("need a non-empty 2-D point array")
    if not np.isfinite(X).all():
        raise ValueError("points contain non-finite values")
    return X


def pairwise_distances(X: np.ndarray) -> np.ndarray:
    return cdist(X, X)


# --------------------------------------------------------------------------
# diagnostics


def distribution(labels) -> tuple[int, float, float]:
    """(cluster_count, largest_fraction, noise_fraction); noise is label -1."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("empty assignment")
    noise = labels == NOISE
    kept = labels[~noise]
    if kept.size == 0:
        return 0, 0.0, 1.0
    _, counts = np.unique(kept, return_counts=True)
    return len(counts), float(counts.max() / kept.size), float(noise.mean())


def _silhouette_weighted(D: np.ndarray, labels: np.ndarray, weights: np.ndarray) -> float:
    """Silhouette over non-noise points where row i stands for ``weights[i]`` copies."""
    keep = np.flatnonzero(labels != NOISE)
    uniq, inv = np.unique(labels[keep], return_inverse=True)
    k = len(uniq)
    if k < 2:
        raise UndefinedScore("silhouette needs at least two non-noise clusters")
    w = weights[keep].astype(float)
    # S[i, c]: weighted distance sum from kept point i to the members of cluster c
    if k <= 64:
        M = np.zeros((len(labels), k))
        M[keep, inv] = w
        S = (D if len(keep) == len(labels) else D[keep]) @ M
    else:
        order = np.argsort(inv, kind="stable")
        starts = np.flatnonzero(np.r_[True, np.diff(inv[order]) != 0])
        S = np.empty((len(keep), k))
        S[order] = np.add.reduceat(D[np.ix_(keep[order], keep[order])] * w[order], starts, axis=1)
    W = np.bincount(inv, weights=w, minlength=k)
    rows = np.arange(len(keep))
    own_w = W[inv]
    # the point itself contributes distance 0 and is left out of the mean
    with np.errstate(divide="ignore", invalid="ignore"):
        a = S[rows, inv] / (own_w - 1.0)
        means = S / W
    means[rows, inv] = np.inf
    b = means.min(axis=1)
    denom = np.maximum(a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom > 0, (b - a) / denom, 0.0)
    s[own_w <= 1.0] = 0.0
    return float(np.dot(w, s) / w.sum())


def silhouette(points, labels) -> float:
    """Mean silhouette over non-noise points; singleton clusters score 0."""
    X = _points(points)
    labels = np.asarray(labels)
    if len(labels) != len(X):
        raise ValueError("one label per point required")
    return _silhouette_weighted(pairwise_distances(X), labels, np.ones(len(X)))


def silhouette_from_distances(D: np.ndarray, labels, weights=None) -> float | None:
    labels = np.asarray(labels)
    w = np.ones(len(labels)) if weights is None else np.asarray(weights, dtype=float)
    try:
        return _silhouette_weighted(D, labels, w)
    except UndefinedScore:
        return None


# --------------------------------------------------------------------------
# k-means


def _sq_dist(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    out = np.empty((len(X), len(C)))
    for j, c in enumerate(C):
        diff = X - c
        out[:, j] = np.einsum("ij,ij->i", diff, diff)
    return out


def _assign(X: np.ndarray, xx: np.ndarray, C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest center per point (lowest index on ties) and squared distances to it."""
    cc = np.einsum("ij,ij->i", C, C)
    # (k, n) layout keeps the reductions over the short axis cheap
    d2 = cc[:, None] + xx[None, :] - 2.0 * (C @ X.T)
    if len(C) > 1:
        # the expansion loses precision; settle close calls with exact distances
        best = d2.min(axis=0)
        slack = 1e-9 * (xx + cc.max() + 1.0)
        close = np.flatnonzero((d2 <= best + slack).sum(axis=0) > 1)
        if close.size:
            d2[:, close] = _sq_dist(X[close], C).T
    labels = d2.argmin(axis=0)
    diff = X - C[labels]
    return labels, np.einsum("ij,ij->i", diff, diff)


def _kmeans_pp(X: np.ndarray, w: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    first = rng.choice(n, p=w / w.sum())
    centers = [X[first]]
    closest = ((X - X[first]) ** 2).sum(axis=1)
    for _ in range(1, k):
        mass = closest * w
        total = mass.sum()
        if total <= 0:
            # every point coincides with a chosen center
            nxt = rng.choice(n, p=w / w.sum())
        else:
            nxt = rng.choice(n, p=mass / total)
        centers.append(X[nxt])
        closest = np.minimum(closest, ((X - X[nxt]) ** 2).sum(axis=1))
    return np.array(centers)


def _lloyd(X, w, centers, max_iter, tol):
    xx = np.einsum("ij,ij->i", X, X)
    k = len(centers)
    trace = []
    prev = None
    for _ in range(max_iter):
        labels, d2 = _assign(X, xx, centers)
        inertia = float(np.dot(w, d2))
        trace.append(inertia)
        if prev is not None and prev - inertia <= tol * prev:
            break
        prev = inertia
        mass = np.bincount(labels, weights=w, minlength=k)
        sums = np.stack([np.bincount(labels, weights=w * X[:, d], minlength=k) for d in range(X.shape[1])], axis=1)
        filled = mass > 0
        # an emptied cluster keeps its previous center
        centers = centers.copy()
        centers[filled] = sums[filled] / mass[filled, None]
    labels, d2 = _assign(X, xx, centers)
    inertia = float(np.dot(w, d2))
    if inertia < trace[-1]:
        trace.append(inertia)
    return labels, centers, inertia, trace


def kmeans_fit(points, config: KMeansConfig, weights=None) -> ClusterModel:
    """Lloyd iterations from k-means++ seeds; best of ``n_init`` restarts by inertia."""
    X = _points(points)
    n = len(X)
    if config.k > n:
        raise TooFewPoints(f"k={config.k} exceeds {n} points")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    degenerate = config.k > 1 and np.all(X == X[0])
    best = None
    for run in range(config.n_init):
        rng = np.random.default_rng([config.seed, run])
        centers = _kmeans_pp(X, w, config.k, rng)
        labels, centers, inertia, trace = _lloyd(X, w, centers, config.max_iter, config.tol)
        if best is None or inertia < best[2]:
            best = (labels, centers, inertia, trace)
    labels, centers, inertia, trace = best
    # renumber non-empty clusters 0..m-1 in center order
    used = np.unique(labels)
    remap = np.full(config.k, NOISE)
    remap[used] = np.arange(len(used))
    labels = remap[labels]
    count, largest, noise = distribution(labels)
    if degenerate:
        log.warning("all %d points are identical; k-means centers are duplicates", n)
    return ClusterModel(
        algorithm="kmeans",
        labels=labels,
        cluster_count=count,
        largest_fraction=largest,
        noise_fraction=noise,
        centers=centers,
        inertia=inertia,
        inertia_trace=trace,
        degenerate=bool(degenerate),
        params={"k": config.k},
    )


# --------------------------------------------------------------------------
# DBSCAN


def _order_clusters(comp: np.ndarray, core: np.ndarray, first_index: np.ndarray) -> np.ndarray:
    """Relabel core components 0..m-1 by the lowest original index they contain."""
    labels = np.full(len(comp), NOISE)
    core_idx = np.flatnonzero(core)
    if core_idx.size == 0:
        return labels
    comps, inv = np.unique(comp[core_idx], return_inverse=True)
    lowest = np.full(len(comps), np.iinfo(np.int64).max)
    np.minimum.at(lowest, inv, first_index[core_idx])
    rank = np.empty(len(comps), dtype=int)
    rank[np.argsort(lowest, kind="stable")] = np.arange(len(comps))
    labels[core_idx] = rank[inv]
    return labels


def _attach_border(labels: np.ndarray, core: np.ndarray, near: np.ndarray) -> np.ndarray:
    """Give each non-core point the lowest cluster id among core points in ``near``."""
    out = labels.copy()
    rest = np.flatnonzero(~core)
    cores = np.flatnonzero(core)
    if rest.size == 0 or cores.size == 0:
        return out
    reach = near[np.ix_(rest, cores)]
    cand = np.where(reach, labels[cores][None, :], np.iinfo(np.int64).max)
    best = cand.min(axis=1)
    hit = reach.any(axis=1)
    out[rest[hit]] = best[hit]
    return out


def _dbscan_from_distances(D: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    near = D <= eps
    core = near.sum(axis=1) >= min_pts
    cores = np.flatnonzero(core)
    comp = np.full(len(D), -1)
    if cores.size:
        graph = csr_matrix(near[np.ix_(cores, cores)])
        _, sub = connected_components(graph, directed=False)
        comp[cores] = sub
    labels = _order_clusters(comp, core, np.arange(len(D)))
    return _attach_border(labels, core, near)


def _model_from_labels(algorithm: str, labels: np.ndarray, sil: float | None, params: dict) -> ClusterModel:
    count, largest, noise = distribution(labels)
    return ClusterModel(
        algorithm=algorithm,
        labels=labels,
        cluster_count=count,
        largest_fraction=largest,
        noise_fraction=noise,
        silhouette=sil,
        params=params,
    )


def dbscan_fit(points, config: DbscanConfig) -> ClusterModel:
    """Density clustering with a closed eps-ball and self-inclusive ``min_pts``.

    Cluster ids follow the lowest-index core point of each cluster; a border
    point joins the lowest-numbered cluster that reaches it.
    """
    X = _points(points)
    D = pairwise_distances(X)
    labels = _dbscan_from_distances(D, config.eps, config.min_pts)
    sil = silhouette_from_distances(D, labels)
    return _model_from_labels("dbscan", labels, sil, {"eps": config.eps, "min_pts": config.min_pts})


class _UniquePoints:
    """Distinct rows of a point set with multiplicities and first-occurrence indices."""

    def __init__(self, X: np.ndarray):
        U, first, inverse, counts = np.unique(X, axis=0, return_index=True, return_inverse=True, return_counts=True)
        self.points = U
        self.first = first
        self.inverse = inverse.reshape(-1)
        self.weights = counts.astype(float)
        self.D = pairwise_distances(U)

    def expand(self, labels_u: np.ndarray) -> np.ndarray:
        return labels_u[self.inverse]


class _Neighbours:
    """The ``width`` nearest distinct points of every point, sorted by distance."""

    def __init__(self, D: np.ndarray, weights: np.ndarray, width: int):
        n = len(D)
        width = min(width, n)
        if width < n:
            part = np.argpartition(D, width - 1, axis=1)[:, :width]
        else:
            part = np.tile(np.arange(n), (n, 1))
        dist = np.take_along_axis(D, part, axis=1)
        order = np.argsort(dist, axis=1, kind="stable")
        self.index = np.take_along_axis(part, order, axis=1)
        self.dist = np.take_along_axis(dist, order, axis=1)
        self.cum_weight = np.cumsum(weights[self.index], axis=1)

    def core_distance(self, min_pts: int) -> np.ndarray:
        """Smallest radius holding ``min_pts`` weighted points (inf if never)."""
        pos = (self.cum_weight < min_pts).sum(axis=1)
        cd = np.full(len(pos), np.inf)
        ok = pos < self.dist.shape[1]
        cd[ok] = self.dist[ok, pos[ok]]
        return cd


def _cut_single_linkage(Z: np.ndarray, n: int, height: float) -> np.ndarray:
    """Flat components of a single-linkage tree cut at ``height`` (merges <= height)."""
    parent = np.arange(2 * n - 1)
    take = np.flatnonzero(Z[:, 2] <= height)
    parent[Z[take, 0].astype(int)] = n + take
    parent[Z[take, 1].astype(int)] = n + take
    while True:
        nxt = parent[parent]
        if np.array_equal(nxt, parent):
            break
        parent = nxt
    return parent[:n]


def _attach_border_sparse(labels: np.ndarray, core: np.ndarray, nb: _Neighbours, eps: float) -> np.ndarray:
    # a non-core point has fewer than min_pts neighbours, all inside nb's window
    out = labels.copy()
    rest = np.flatnonzero(~core)
    if rest.size == 0 or not core.any():
        return out
    idx = nb.index[rest]
    ok = (nb.dist[rest] <= eps) & core[idx]
    cand = np.where(ok, labels[idx], np.iinfo(np.int64).max)
    best = cand.min(axis=1)
    hit = ok.any(axis=1)
    out[rest[hit]] = best[hit]
    return out


def _grid_for_min_pts(
    up: _UniquePoints, nb: _Neighbours, min_pts: int, eps_values: Sequence[float]
) -> list[np.ndarray]:
    D = up.D
    n = len(D)
    cd = nb.core_distance(min_pts)
    if n > 1:
        # single linkage over mutual-reachability distance: cut at eps, its
        # components containing core points are the DBSCAN core components
        finite_cd = np.where(np.isfinite(cd), cd, np.finfo(float).max)
        mr = np.maximum(D, np.maximum.outer(finite_cd, finite_cd))
        Z = linkage(squareform(mr, checks=False), method="single")
    out = []
    for eps in eps_values:
        core = cd <= eps
        comp = _cut_single_linkage(Z, n, eps) if n > 1 else np.zeros(1, dtype=int)
        labels = _order_clusters(comp, core, up.first)
        out.append(_attach_border_sparse(labels, core, nb, eps))
    return out


def grid_search_dbscan(
    points,
    min_pts_range: Sequence[int] = DEFAULT_MIN_PTS,
    eps_range: Sequence[float] = DEFAULT_EPS,
    params: dict | None = None,
) -> list[tuple[DbscanConfig, ClusterModel]]:
    """Fit DBSCAN for every (min_pts, eps) pair, min_pts outer, eps inner."""
    X = _points(points)
    up = _UniquePoints(X)
    nb = _Neighbours(up.D, up.weights, max(min_pts_range))
    sil_cache: dict[bytes, float | None] = {}
    out = []
    for m in min_pts_range:
        for eps, lab_u in zip(eps_range, _grid_for_min_pts(up, nb, m, eps_range)):
            key = lab_u.tobytes()
            if key not in sil_cache:
                sil_cache[key] = silhouette_from_distances(up.D, lab_u, up.weights)
            extra = dict(params or {})
            extra.update(eps=eps, min_pts=m)
            out.append((DbscanConfig(eps, m), _model_from_labels("dbscan", up.expand(lab_u), sil_cache[key], extra)))
    return out


def kmeans_sweep(
    points,
    k_range: Sequence[int] = DEFAULT_K_RANGE,
    seed: int = 0,
    n_init: int = 10,
    params: dict | None = None,
) -> list[ClusterModel]:
    """k-means for each k (skipping k larger than the number of distinct points)."""
    X = _points(points)
    up = _UniquePoints(X)
    out = []
    for k in k_range:
        if k > len(up.points):
            continue
        m = kmeans_fit(up.points, KMeansConfig(k=k, n_init=n_init, seed=seed), weights=up.weights)
        m.silhouette = silhouette_from_distances(up.D, m.labels, up.weights)
        m.labels = up.expand(m.labels)
        m.params.update(params or {})
        out.append(m)
    return out


# --------------------------------------------------------------------------
# selection


def infeasibility(model: ClusterModel, policy: SelectionPolicy) -> str | None:
    if model.cluster_count < policy.min_clusters:
        return f"{model.cluster_count} clusters < {policy.min_clusters}"
    if model.cluster_count > policy.max_clusters:
        return f"{model.cluster_count} clusters > {policy.max_clusters}"
    if model.largest_fraction > policy.max_largest_fraction:
        return f"largest cluster {model.largest_fraction:.3f} > {policy.max_largest_fraction}"
    if model.noise_fraction > policy.max_noise_fraction:
        return f"noise {model.noise_fraction:.3f} > {policy.max_noise_fraction}"
    if model.silhouette is None:
        return "silhouette undefined"
    return None


def select_model(candidates: Sequence[ClusterModel], policy: SelectionPolicy = SelectionPolicy()) -> ClusterModel:
    """Highest silhouette among feasible candidates.

    Ties go to fewer clusters, then a smaller largest cluster, then input order.
    """
    if not candidates:
        raise ValueError("no candidates to select from")
    best = None
    best_key = None
    reasons = []
    for i, m in enumerate(candidates):
        why = infeasibility(m, policy)
        if why is not None:
            reasons.append(f"#{i} ({m.algorithm} {m.params}): {why}")
            continue
        key = (-m.silhouette, m.cluster_count, m.largest_fraction)
        if best_key is None or key < best_key:
            best, best_key = m, key
    if best is None:
        raise NoFeasibleCandidate(reasons)
    return best
