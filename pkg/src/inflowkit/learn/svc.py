"""Soft-margin support vector classifier trained by sequential minimal optimization.

Multi-class problems are split one-vs-one; each pair is solved with the
maximal-violating-pair working set and an RBF kernel.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from ..errors import DimensionMismatch, SingleClass


@dataclass(frozen=True)
class SvcConfig:
    c: float = 1.0
    # None selects 1 / (n_features * Var(X)), or 1 for constant input
    kernel_gamma: float | None = None
    tol: float = 1e-3
    max_passes: int = 100
    seed: int = 0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("c must be positive")


@dataclass
class PairMachine:
    positive: object
    negative: object
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i for the support vectors
    rho: float
    alpha: np.ndarray  # full dual solution over the pair's training rows
    y: np.ndarray
    iterations: int
    converged: bool

    def decision(self, K: np.ndarray) -> np.ndarray:
        """``K`` is the kernel between the query rows and the support vectors."""
        return K @ self.dual_coef - self.rho


@dataclass
class SvcModel:
    classes: np.ndarray
    gamma: float
    c: float
    machines: list[PairMachine] = field(default_factory=list)
    n_features: int = 0

    def to_dict(self) -> dict:
        return {
            "classes": self.classes.tolist(),
            "gamma": self.gamma,
            "c": self.c,
            "pairs": [
                {
                    "positive": _plain(m.positive),
                    "negative": _plain(m.negative),
                    "support_vectors": m.support_vectors.tolist(),
                    "dual_coef": m.dual_coef.tolist(),
                    "rho": m.rho,
                }
                for m in self.machines
            ],
        }


def _plain(v):
    return v.item() if hasattr(v, "item") else v


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    d2 = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(d2, 0.0))


def default_gamma(X: np.ndarray) -> float:
    var = float(X.var())
    return 1.0 / (X.shape[1] * var) if var > 0 else 1.0


def smo_solve(K: np.ndarray, y: np.ndarray, c: float, tol: float, max_iter: int):
    """Dual soft-margin SVM on a precomputed kernel; ``y`` in {+1, -1}.

    Returns (alpha, rho, iterations, converged).
    """
    n = len(y)
    Q = (y[:, None] * y[None, :]) * K
    QD = np.diag(Q).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)
    converged = False
    it = 0
    while it < max_iter:
        up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < c))
        if not up.any() or not low.any():
            converged = True
            break
        score = -y * G
        i = int(np.flatnonzero(up)[np.argmax(score[up])])
        j = int(np.flatnonzero(low)[np.argmin(score[low])])
        if score[i] - score[j] < tol:
            converged = True
            break
        it += 1
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = max(QD[i] + QD[j] + 2.0 * Q[i, j], 1e-12)
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ai += delta
            aj += delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > c:
                    ai, aj = c, c - diff
            elif aj > c:
                aj, ai = c, c + diff
        else:
            quad = max(QD[i] + QD[j] - 2.0 * Q[i, j], 1e-12)
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            ai -= delta
            aj += delta
            if total > c:
                if ai > c:
                    ai, aj = c, total - c
            elif aj < 0:
                aj, ai = 0.0, total
            if total > c:
                if aj > c:
                    aj, ai = c, total - c
            elif ai < 0:
                ai, aj = 0.0, total
        d_i, d_j = ai - alpha[i], aj - alpha[j]
        alpha[i], alpha[j] = ai, aj
        G += Q[:, i] * d_i + Q[:, j] * d_j

    yG = y * G
    at_upper = alpha >= c
    at_lower = alpha <= 0
    free = ~at_upper & ~at_lower
    if free.any():
        rho = float(yG[free].mean())
    else:
        ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
        lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
        ub = yG[ub_mask].min() if ub_mask.any() else np.inf
        lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
        rho = float((ub + lb) / 2) if np.isfinite(ub) and np.isfinite(lb) else float(ub if np.isfinite(ub) else lb)
    return alpha, rho, it, converged


def svc_fit(X, labels, config: SvcConfig = SvcConfig(), threads: int = 1) -> SvcModel:
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels)
    if X.ndim != 2 or len(X) != len(labels):
        raise DimensionMismatch("X must be 2-D with one label per row")
    classes = np.unique(labels)
    if len(classes) < 2:
        raise SingleClass("need at least two classes")
    gamma = config.kernel_gamma if config.kernel_gamma is not None else default_gamma(X)
    K_all = rbf_kernel(X, X, gamma)

    def solve_pair(pair):
        a, b = pair
        idx = np.flatnonzero((labels == a) | (labels == b))
        y = np.where(labels[idx] == a, 1.0, -1.0)
        K = K_all[np.ix_(idx, idx)]
        alpha, rho, it, ok = smo_solve(K, y, config.c, config.tol, config.max_passes * max(len(idx), 1))
        sv = alpha > 0
        return PairMachine(
            positive=a,
            negative=b,
            support_vectors=X[idx[sv]],
            dual_coef=alpha[sv] * y[sv],
            rho=rho,
            alpha=alpha,
            y=y,
            iterations=it,
            converged=ok,
        )

    pairs = list(combinations(classes.tolist(), 2))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            machines = list(pool.map(solve_pair, pairs))
    else:
        machines = [solve_pair(p) for p in pairs]
    return SvcModel(classes=classes, gamma=gamma, c=config.c, machines=machines, n_features=X.shape[1])


def pairwise_votes(model: SvcModel, X) -> np.ndarray:
    """(rows, classes) matrix of one-vs-one votes."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DimensionMismatch(f"model expects {model.n_features} columns, got shape {X.shape}")
    pos = {c: i for i, c in enumerate(model.classes.tolist())}
    votes = np.zeros((len(X), len(model.classes)), dtype=int)
    for m in model.machines:
        if len(m.support_vectors):
            f = m.decision(rbf_kernel(X, m.support_vectors, model.gamma))
        else:
            f = np.full(len(X), -m.rho)
        win_pos = f > 0
        votes[win_pos, pos[m.positive]] += 1
        votes[~win_pos, pos[m.negative]] += 1
    return votes


def svc_predict(model: SvcModel, X) -> np.ndarray:
    """One-vs-one vote; ties go to the lowest class label."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 2 and len(X) == 0:
        return np.empty(0, dtype=model.classes.dtype)
    return model.classes[pairwise_votes(model, X).argmax(axis=1)]
