"""Learners used by the inflow experiments, plus the per-pair prediction error."""

from __future__ import annotations

from typing import Literal

import numpy as np

from ..errors import DimensionMismatch
from .forest import ForestConfig, ForestModel, forest_fit, forest_predict, gini
from .lasso import LassoConfig, LassoModel, lasso_fit, lasso_predict, soft_threshold
from .svc import SvcConfig, SvcModel, svc_fit, svc_predict


def pair_error(y_pred, y_true, norm: Literal["l1", "l2"] = "l2") -> float:
    """Norm of the difference between one prediction and its target."""
    a = np.atleast_1d(np.asarray(y_pred, dtype=float))
    b = np.atleast_1d(np.asarray(y_true, dtype=float))
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    d = (a - b).ravel()
    if norm == "l1":
        return float(np.abs(d).sum())
    if norm == "l2":
        return float(np.sqrt(d @ d))
    raise ValueError(f"unknown norm {norm!r}")


__all__ = [
    "ForestConfig",
    "ForestModel",
    "LassoConfig",
    "LassoModel",
    "SvcConfig",
    "SvcModel",
    "forest_fit",
    "forest_predict",
    "gini",
    "lasso_fit",
    "lasso_predict",
    "pair_error",
    "soft_threshold",
    "svc_fit",
    "svc_predict",
]
