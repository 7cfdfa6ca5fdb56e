"""Built-in nuisance learners: main-terms logistic regression and a
stratified Nadaraya-Watson kernel smoother with cross-validated bandwidth.

These cover the simulation study's two regimes: the logistic model is the
deliberately rigid (and, under an interaction in the truth, misspecified)
learner, while the kernel smoother is the flexible, consistent one. External
prediction columns cover every other use case.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import LearnerError

RIDGE_JITTER = 1e-8
IRLS_TOL = 1e-10
IRLS_MAX_ITER = 100
KERNEL_DENOM_FLOOR = 1e-300


@dataclass(frozen=True)
class LogisticFit:
    """Main-terms logistic fit; coefficient 0 is the intercept."""

    coefficients: np.ndarray

    def __post_init__(self):
        coef = np.asarray(self.coefficients, dtype=float)
        if not np.all(np.isfinite(coef)):
            raise LearnerError("logistic coefficients must be finite")
        object.__setattr__(self, "coefficients", coef)
        coef.setflags(write=False)


def _design(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a 2-d matrix")
    return np.column_stack([np.ones(X.shape[0]), X])


def fit_logistic_main_terms(X, y) -> LogisticFit:
    """Bernoulli MLE with intercept and linear main effects via IRLS.

    The Newton step solves ridge-jittered normal equations
    ``(X'WX + 1e-8 I) d = X'(y - p)``; iteration stops when the largest
    coefficient change falls below 1e-10 or after 100 iterations. Perfectly
    separated data yields finite (ridge-bounded) coefficients rather than an
    error; only non-finite iterates raise.
    """
    Xd = _design(X)
    y = np.asarray(y, dtype=float)
    n, p = Xd.shape
    if y.shape != (n,):
        raise ValueError("y must match X in length")
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise ValueError("y must be binary 0/1")
    if n < p:
        raise ValueError(f"need n >= d+1, got n={n}, d={p - 1}")

    beta = np.zeros(p)
    eye = np.eye(p)
    for iteration in range(IRLS_MAX_ITER):
        eta = Xd @ beta
        prob = expit(eta)
        weight = prob * (1.0 - prob)
        hess = (Xd * weight[:, None]).T @ Xd + RIDGE_JITTER * eye
        score = Xd.T @ (y - prob)
        step = np.linalg.solve(hess, score)
        beta = beta + step
        if not np.all(np.isfinite(beta)):
            raise LearnerError(f"non-finite coefficients at IRLS iteration {iteration + 1}")
        if np.abs(step).max() < IRLS_TOL:
            break
    return LogisticFit(coefficients=beta)


def predict_logistic(fit: LogisticFit, X) -> np.ndarray:
    """expit of the linear predictor, clipped into the open interval (0, 1)."""
    Xd = _design(X)
    if Xd.shape[1] != fit.coefficients.shape[0]:
        raise ValueError("column count does not match the fit")
    return np.clip(expit(Xd @ fit.coefficients), 1e-12, 1.0 - 1e-12)


def default_bandwidth_grid(x, n_points: int = 20) -> np.ndarray:
    """Geometric grid of bandwidths spanning [0.05, 2] times sd(x)."""
    scale = float(np.std(np.asarray(x, dtype=float)))
    if scale <= 0:
        scale = 1.0
    return np.geomspace(0.05 * scale, 2.0 * scale, n_points)


def encode_strata(*columns) -> np.ndarray:
    """Integer stratum label per row from the cross-classification of columns."""
    stacked = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    _, inverse = np.unique(stacked, axis=0, return_inverse=True)
    return inverse.astype(np.int64)


@dataclass(frozen=True)
class KernelFit:
    """Training data, selected bandwidth, and a per-stratum index."""

    train_x: np.ndarray
    train_y: np.ndarray
    strata_key: np.ndarray
    bandwidth: float
    _by_stratum: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.bandwidth <= 0 or not np.isfinite(self.bandwidth):
            raise LearnerError("bandwidth must be positive and finite")
        if self.train_x.size == 0:
            raise LearnerError("training data must be nonempty")
        index = {}
        for label in np.unique(self.strata_key):
            rows = np.flatnonzero(self.strata_key == label)
            index[label] = (self.train_x[rows], self.train_y[rows])
        object.__setattr__(self, "_by_stratum", index)


def _nw_smooth(train_x: np.ndarray, train_y: np.ndarray, x_new: np.ndarray, h: float) -> np.ndarray:
    """Gaussian NW average; nearest-neighbour fallback when weights underflow."""
    diff = (x_new[:, None] - train_x[None, :]) / h
    kernel = np.exp(-0.5 * diff * diff)
    denom = kernel.sum(axis=1)
    num = kernel @ train_y
    out = np.empty(x_new.shape[0])
    ok = denom >= KERNEL_DENOM_FLOOR
    out[ok] = num[ok] / denom[ok]
    for i in np.flatnonzero(~ok):
        out[i] = train_y[np.argmin(np.abs(train_x - x_new[i]))]
    return out


def fit_kernel_stratified(
    x, y, strata, bandwidth_grid=None, cv_folds: int = 5, rng: np.random.Generator | None = None
) -> KernelFit:
    """Select one bandwidth by pooled K-fold CV across strata and store the data.

    Every stratum must contain at least ``cv_folds`` points so that each
    held-out point has same-stratum training neighbours. CV error is the
    pooled squared prediction error; exact ties are broken toward the largest
    bandwidth (smoother fits).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    strata = np.asarray(strata)
    if x.shape != y.shape or x.shape != strata.shape or x.size == 0:
        raise ValueError("x, y, strata must be equal-length nonempty vectors")
    if bandwidth_grid is None:
        bandwidth_grid = default_bandwidth_grid(x)
    grid = np.asarray(bandwidth_grid, dtype=float)
    if grid.size == 0 or np.any(grid <= 0):
        raise ValueError("bandwidth grid must be nonempty and positive")
    if cv_folds < 2:
        raise ValueError("cv_folds must be at least 2")
    if rng is None:
        rng = np.random.default_rng(0)

    labels = np.unique(strata)
    fold_of = np.empty(x.shape[0], dtype=np.int64)
    for label in labels:
        rows = np.flatnonzero(strata == label)
        if rows.size < cv_folds:
            raise LearnerError(
                f"stratum {label!r} has {rows.size} points, fewer than cv_folds={cv_folds}"
            )
        shuffled = rows[rng.permutation(rows.size)]
        fold_of[shuffled] = np.arange(rows.size) % cv_folds

    errors = np.zeros(grid.size)
    for label in labels:
        rows = np.flatnonzero(strata == label)
        for fold in range(cv_folds):
            test = rows[fold_of[rows] == fold]
            train = rows[fold_of[rows] != fold]
            if test.size == 0 or train.size == 0:
                continue
            diff = x[test][:, None] - x[train][None, :]
            d2 = diff * diff
            for g, h in enumerate(grid):
                kernel = np.exp(d2 * (-0.5 / (h * h)))
                denom = kernel.sum(axis=1)
                pred = np.empty(test.size)
                ok = denom >= KERNEL_DENOM_FLOOR
                pred[ok] = (kernel @ y[train])[ok] / denom[ok]
                for i in np.flatnonzero(~ok):
                    pred[i] = y[train][np.argmin(np.abs(x[train] - x[test][i]))]
                resid = pred - y[test]
                errors[g] += float(resid @ resid)

    best = grid.size - 1 - int(np.argmin(errors[::-1]))  # ties -> largest h
    return KernelFit(train_x=x.copy(), train_y=y.copy(), strata_key=strata.copy(), bandwidth=float(grid[best]))


def predict_kernel(fit: KernelFit, x_new, strata_new) -> np.ndarray:
    """Kernel-weighted average within each query's stratum."""
    x_new = np.asarray(x_new, dtype=float)
    strata_new = np.asarray(strata_new)
    if x_new.shape != strata_new.shape:
        raise ValueError("x_new and strata_new must have equal length")
    out = np.empty(x_new.shape[0])
    for label in np.unique(strata_new):
        if label not in fit._by_stratum:
            raise LearnerError(f"stratum {label!r} was not seen in training")
        tx, ty = fit._by_stratum[label]
        rows = np.flatnonzero(strata_new == label)
        out[rows] = _nw_smooth(tx, ty, x_new[rows], fit.bandwidth)
    return out
