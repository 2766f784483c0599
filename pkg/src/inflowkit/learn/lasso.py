"""LASSO regression by cyclic coordinate descent."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionMismatch, EmptyInput, NonFiniteValue


@dataclass(frozen=True)
class LassoConfig:
    gamma: float = 1.0
    max_sweeps: int = 1000
    tol: float = 1e-6

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")


@dataclass
class LassoModel:
    intercept: float
    coefficients: np.ndarray
    converged: bool
    sweeps_used: int
    # coefficients on the internally standardized columns
    standardized_coefficients: np.ndarray = field(default_factory=lambda: np.empty(0))
    objective_trace: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "intercept": self.intercept,
            "coefficients": self.coefficients.tolist(),
            "standardized_coefficients": self.standardized_coefficients.tolist(),
            "converged": self.converged,
            "sweeps_used": self.sweeps_used,
        }


def soft_threshold(z: float, t: float) -> float:
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def _check(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyInput("X must be a non-empty 2-D matrix")
    if len(y) != X.shape[0]:
        raise DimensionMismatch(f"{X.shape[0]} rows but {len(y)} targets")
    bad = np.argwhere(~np.isfinite(X))
    if len(bad):
        raise NonFiniteValue(int(bad[0][0]), int(bad[0][1]))
    if not np.isfinite(y).all():
        raise NonFiniteValue(int(np.flatnonzero(~np.isfinite(y))[0]), -1)
    return X, y


def lasso_objective(Z: np.ndarray, yc: np.ndarray, beta: np.ndarray, gamma: float) -> float:
    r = yc - Z @ beta
    return float(r @ r / (2 * len(yc)) + gamma * np.abs(beta).sum())


def lasso_fit(X, y, config: LassoConfig = LassoConfig()) -> LassoModel:
    """Minimize (1/2n)||y - X theta - b||^2 + gamma ||theta||_1.

    Columns are standardized (population std) for the descent and the
    coefficients mapped back afterwards; constant columns get 0.
    """
    X, y = _check(X, y)
    n, p = X.shape
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    live = std > 0
    Z = np.zeros_like(X)
    Z[:, live] = (X[:, live] - mean[live]) / std[live]
    y_mean = y.mean()
    yc = y - y_mean
    beta = np.zeros(p)
    resid = yc.copy()
    cols = np.flatnonzero(live)
    trace = [lasso_objective(Z, yc, beta, config.gamma)]
    converged = not cols.size
    sweeps = 0
    for sweeps in range(1, config.max_sweeps + 1) if cols.size else ():
        max_delta = 0.0
        for j in cols:
            zj = Z[:, j]
            old = beta[j]
            # standardized columns have zj.zj / n == 1
            rho = zj @ resid / n + old
            new = soft_threshold(rho, config.gamma)
            if new != old:
                resid -= (new - old) * zj
                beta[j] = new
                max_delta = max(max_delta, abs(new - old))
        trace.append(lasso_objective(Z, yc, beta, config.gamma))
        if max_delta < config.tol:
            converged = True
            break
    theta = np.zeros(p)
    theta[live] = beta[live] / std[live]
    intercept = float(y_mean - theta @ mean)
    return LassoModel(
        intercept=intercept,
        coefficients=theta,
        converged=converged,
        sweeps_used=sweeps,
        standardized_coefficients=beta,
        objective_trace=trace,
    )


def lasso_predict(model: LassoModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(model.coefficients):
        raise DimensionMismatch(
            f"model has {len(model.coefficients)} coefficients, input has shape {X.shape}"
        )
    return X @ model.coefficients + model.intercept
