"""Column-wise scalers: MinMax, two robust variants and quantile transforms."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.special import ndtri

from .errors import DimensionMismatch, EmptyInput, InvalidConfig, NonFiniteValue, NotInvertible

ScalerKind = Literal["minmax", "robust_v1", "robust_v2", "quantile_uniform", "quantile_normal"]

SCALER_KINDS: tuple[ScalerKind, ...] = (
    "minmax",
    "robust_v1",
    "robust_v2",
    "quantile_uniform",
    "quantile_normal",
)
# percentile window per robust variant
ROBUST_WINDOWS = {"robust_v1": (25.0, 75.0), "robust_v2": (10.0, 90.0)}
NORMAL_CLIP = 1e-7


@dataclass(frozen=True)
class ScalerSpec:
    kind: ScalerKind
    quantile_landmarks: int = 1000

    def __post_init__(self):
        if self.kind not in SCALER_KINDS:
            raise InvalidConfig(f"unknown scaler kind {self.kind!r}")
        if self.kind.startswith("quantile") and self.quantile_landmarks < 2:
            raise InvalidConfig("quantile_landmarks must be >= 2")


@dataclass(frozen=True)
class FittedScaler:
    """Per-column parameters.

    minmax: ``low``/``high`` are min and max.  robust: ``low`` is the median
    and ``high`` the scale.  quantile: ``landmarks[j]`` holds column j's
    input values at the ``ranks`` grid.
    """

    spec: ScalerSpec
    low: np.ndarray
    high: np.ndarray
    constant: np.ndarray
    ranks: np.ndarray = field(default_factory=lambda: np.empty(0))
    landmarks: tuple[np.ndarray, ...] = ()

    @property
    def n_columns(self) -> int:
        return len(self.constant)

    def to_dict(self) -> dict:
        d = {
            "kind": self.spec.kind,
            "quantile_landmarks": self.spec.quantile_landmarks,
            "low": self.low.tolist(),
            "high": self.high.tolist(),
            "constant": self.constant.tolist(),
        }
        if self.spec.kind.startswith("quantile"):
            d["ranks"] = self.ranks.tolist()
            d["landmarks"] = [lm.tolist() for lm in self.landmarks]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "FittedScaler":
        return cls(
            spec=ScalerSpec(d["kind"], d.get("quantile_landmarks", 1000)),
            low=np.asarray(d["low"], dtype=float),
            high=np.asarray(d["high"], dtype=float),
            constant=np.asarray(d["constant"], dtype=bool),
            ranks=np.asarray(d.get("ranks", []), dtype=float),
            landmarks=tuple(np.asarray(lm, dtype=float) for lm in d.get("landmarks", [])),
        )

    @classmethod
    def from_json(cls, text: str) -> "FittedScaler":
        return cls.from_dict(json.loads(text))


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got {X.ndim} dimensions")
    return X


def _check_finite(X: np.ndarray) -> None:
    bad = ~np.isfinite(X)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise NonFiniteValue(int(r), int(c))


def fit(spec: ScalerSpec, X) -> FittedScaler:
    X = _as_matrix(X)
    if X.size == 0:
        raise EmptyInput("cannot fit a scaler on an empty matrix")
    _check_finite(X)
    cmin, cmax = X.min(axis=0), X.max(axis=0)
    constant = cmax == cmin
    kind = spec.kind
    if kind == "minmax":
        return FittedScaler(spec, cmin, cmax, constant)
    if kind in ROBUST_WINDOWS:
        lo_q, hi_q = ROBUST_WINDOWS[kind]
        lo, med, hi = np.percentile(X, [lo_q, 50.0, hi_q], axis=0)
        scale = hi - lo
        # a zero percentile window on a non-constant column (sparse counts)
        # falls back to the full range so the column stays on a comparable scale
        span = cmax - cmin
        scale = np.where(scale > 0, scale, np.where(span > 0, span, 1.0))
        return FittedScaler(spec, med, scale, constant)
    n_land = min(X.shape[0], spec.quantile_landmarks)
    ranks = np.linspace(0.0, 1.0, n_land)
    landmarks = tuple(np.percentile(X[:, j], ranks * 100.0) for j in range(X.shape[1]))
    return FittedScaler(spec, cmin, cmax, constant, ranks, landmarks)


def _uniform_column(x: np.ndarray, landmarks: np.ndarray, ranks: np.ndarray) -> np.ndarray:
    # averaging the forward and reversed interpolation maps a run of tied
    # landmarks to the middle of its rank interval
    fwd = np.interp(x, landmarks, ranks)
    bwd = -np.interp(-x, -landmarks[::-1], -ranks[::-1])
    return np.clip(0.5 * (fwd + bwd), 0.0, 1.0)


def transform(scaler: FittedScaler, X) -> np.ndarray:
    X = _as_matrix(X)
    if X.shape[1] != scaler.n_columns:
        raise DimensionMismatch(f"scaler fitted on {scaler.n_columns} columns, got {X.shape[1]}")
    _check_finite(X)
    kind = scaler.spec.kind
    if kind == "minmax":
        span = np.where(scaler.constant, 1.0, scaler.high - scaler.low)
        out = (X - scaler.low) / span
    elif kind in ROBUST_WINDOWS:
        out = (X - scaler.low) / scaler.high
    else:
        out = np.empty_like(X)
        for j in range(X.shape[1]):
            if scaler.constant[j]:
                continue
            out[:, j] = _uniform_column(X[:, j], scaler.landmarks[j], scaler.ranks)
        if kind == "quantile_normal":
            out = ndtri(np.clip(out, NORMAL_CLIP, 1.0 - NORMAL_CLIP))
    out[:, scaler.constant] = 0.0
    return out


def inverse_transform(scaler: FittedScaler, Xs) -> np.ndarray:
    kind = scaler.spec.kind
    if kind.startswith("quantile"):
        raise NotInvertible(kind)
    Xs = _as_matrix(Xs)
    if Xs.shape[1] != scaler.n_columns:
        raise DimensionMismatch(f"scaler fitted on {scaler.n_columns} columns, got {Xs.shape[1]}")
    if kind == "minmax":
        out = Xs * (scaler.high - scaler.low) + scaler.low
    else:
        out = Xs * scaler.high + scaler.low
    # constant columns map back to the fitted constant
    out[:, scaler.constant] = scaler.low[scaler.constant]
    return out


def fit_transform(spec: ScalerSpec, X) -> tuple[FittedScaler, np.ndarray]:
    s = fit(spec, X)
    return s, transform(s, X)
