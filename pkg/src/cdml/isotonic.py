"""Weighted pool-adjacent-violators solvers and the step-function calibrator.

Two isotonic problems are solved here. The least-squares problem projects a
vector onto the monotone cone under positive weights. The quadratic
"balancing" problem minimizes ``sum_p w_p c_p^2 - 2 v_p c_p`` over
nondecreasing level vectors clamped to an interval; it is the loss used to
calibrate inverse-weight nuisances. Both produce a :class:`Calibrator`, the
unique cadlag piecewise-constant minimizer with jumps only at observed
predictor values (exact ties in the predictor are pooled first, which pins
down a canonical representative when the argmin set is nontrivial).
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import BoundsError


@dataclass(frozen=True)
class PointLoss:
    """One aggregated term ``w * c^2 - 2 * v * c`` of the quadratic loss at x."""

    x: float
    w: float
    v: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.w) and np.isfinite(self.v)):
            raise ValueError("PointLoss fields must be finite")
        if self.w < 0:
            raise ValueError("PointLoss weight must be nonnegative")


@dataclass(frozen=True)
class Calibrator:
    """Monotone nondecreasing step function: breakpoints and level values.

    Evaluation is right-continuous: an input maps to the level of the
    rightmost breakpoint that does not exceed it. Inputs below the first
    breakpoint clamp to the first level, inputs above the last breakpoint to
    the last level.
    """

    breakpoints: np.ndarray
    levels: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        lv = np.asarray(self.levels, dtype=float)
        if bp.ndim != 1 or bp.shape != lv.shape or bp.size == 0:
            raise ValueError("breakpoints and levels must be equal-length nonempty vectors")
        if not (np.all(np.isfinite(bp)) and np.all(np.isfinite(lv))):
            raise ValueError("calibrator entries must be finite")
        if bp.size > 1 and np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if lv.size > 1 and np.any(np.diff(lv) < 0):
            raise ValueError("levels must be nondecreasing")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "levels", lv)
        bp.setflags(write=False)
        lv.setflags(write=False)

    @property
    def lower_clamp(self) -> float:
        return float(self.levels[0])

    @property
    def upper_clamp(self) -> float:
        return float(self.levels[-1])

    @property
    def n_distinct_levels(self) -> int:
        return int(np.unique(self.levels).size)

    def predict(self, x_new) -> np.ndarray:
        """Evaluate the step function at each input value."""
        x = np.asarray(x_new, dtype=float)
        idx = np.searchsorted(self.breakpoints, x, side="right") - 1
        return self.levels[np.maximum(idx, 0)]

    def to_dict(self) -> dict:
        return {"breakpoints": self.breakpoints.tolist(), "levels": self.levels.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, payload: dict) -> "Calibrator":
        return cls(
            breakpoints=np.asarray(payload["breakpoints"], dtype=float),
            levels=np.asarray(payload["levels"], dtype=float),
        )

    @classmethod
    def from_json(cls, text: str) -> "Calibrator":
        return cls.from_dict(json.loads(text))


def _pava(y: list, w: list) -> list:
    """Nondecreasing weighted PAVA over pre-sorted positions.

    Stack of blocks; a new point is pushed then merged leftward while the
    running block means violate monotonicity. Returns the fitted value at
    every input position. Pure-Python lists keep the hot loop fast.
    """
    n = len(y)
    mean = [0.0] * n
    weight = [0.0] * n
    start = [0] * n
    k = -1
    for i in range(n):
        k += 1
        mean[k] = y[i]
        weight[k] = w[i]
        start[k] = i
        while k > 0 and mean[k - 1] > mean[k]:
            wt = weight[k - 1] + weight[k]
            mean[k - 1] = (weight[k - 1] * mean[k - 1] + weight[k] * mean[k]) / wt
            weight[k - 1] = wt
            k -= 1
    out = [0.0] * n
    for b in range(k + 1):
        end = start[b + 1] if b < k else n
        val = mean[b]
        for j in range(start[b], end):
            out[j] = val
    return out


def pava_weighted(values, weights, direction: str = "nondecreasing") -> np.ndarray:
    """Weighted least-squares projection onto the monotone cone.

    Each output block value equals the weighted mean of the pooled inputs, so
    the result is the unique minimizer of ``sum_i w_i (values_i - c_i)^2``
    over monotone vectors ``c`` in the requested direction.
    """
    y = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    if y.ndim != 1 or y.shape != w.shape or y.size == 0:
        raise ValueError("values and weights must be equal-length nonempty vectors")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(w))):
        raise ValueError("values and weights must be finite")
    if np.any(w <= 0):
        raise ValueError("weights must be strictly positive")
    if direction == "nondecreasing":
        return np.asarray(_pava(y.tolist(), w.tolist()))
    if direction == "nonincreasing":
        return -np.asarray(_pava((-y).tolist(), w.tolist()))
    raise ValueError(f"unknown direction {direction!r}")


def _compress_steps(xs: np.ndarray, fitted: np.ndarray) -> Calibrator:
    """Drop repeated levels, keeping the first x of each constant run."""
    keep = np.empty(xs.size, dtype=bool)
    keep[0] = True
    np.not_equal(fitted[1:], fitted[:-1], out=keep[1:])
    return Calibrator(breakpoints=xs[keep].copy(), levels=fitted[keep].copy())


def fit_ls_isotonic(x, y, weights=None) -> Calibrator:
    """Isotonic least-squares fit of y on x, returned as a step function.

    Exact ties in x are pooled (weighted mean of y) before running PAVA, so
    the fit is the canonical cadlag solution with jumps only at observed x
    values.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape or x.size == 0:
        raise ValueError("x and y must be equal-length nonempty vectors")
    if weights is None:
        w = np.ones_like(x)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != x.shape:
            raise ValueError("weights must match x in length")
        if np.any(w <= 0):
            raise ValueError("weights must be strictly positive")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y)) and np.all(np.isfinite(w))):
        raise ValueError("inputs must be finite")

    ux, inv = np.unique(x, return_inverse=True)
    w_bin = np.bincount(inv, weights=w, minlength=ux.size)
    wy_bin = np.bincount(inv, weights=w * y, minlength=ux.size)
    fitted = np.asarray(_pava((wy_bin / w_bin).tolist(), w_bin.tolist()))
    return _compress_steps(ux, fitted)


def _riesz_block_value(w: float, v: float, lo: float, hi: float) -> float:
    """Argmin of ``w c^2 - 2 v c`` over [lo, hi]; endpoint when the loss is linear."""
    if w > 0.0:
        c = v / w
        if c < lo:
            return lo
        if c > hi:
            return hi
        return c
    if v > 0.0:
        return hi
    return lo


def _riesz_pava(w: list, v: list, lo: float, hi: float) -> list:
    """Generalized PAVA for separable quadratics with a common clamp interval."""
    n = len(w)
    bw = [0.0] * n
    bv = [0.0] * n
    val = [0.0] * n
    start = [0] * n
    k = -1
    for i in range(n):
        k += 1
        bw[k] = w[i]
        bv[k] = v[i]
        val[k] = _riesz_block_value(w[i], v[i], lo, hi)
        start[k] = i
        while k > 0 and val[k - 1] > val[k]:
            bw[k - 1] += bw[k]
            bv[k - 1] += bv[k]
            val[k - 1] = _riesz_block_value(bw[k - 1], bv[k - 1], lo, hi)
            k -= 1
    out = [0.0] * n
    for b in range(k + 1):
        end = start[b + 1] if b < k else n
        c = val[b]
        for j in range(start[b], end):
            out[j] = c
    return out


def _fit_riesz_arrays(x: np.ndarray, w: np.ndarray, v: np.ndarray, lo: float, hi: float) -> Calibrator:
    """Solve the clamped quadratic isotonic problem on pre-aggregated points."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    if xs.size > 1 and np.any(np.diff(xs) <= 0):
        # aggregate duplicate x (callers may pass raw duplicates)
        ux, inv = np.unique(xs, return_inverse=True)
        ws = np.bincount(inv, weights=w[order], minlength=ux.size)
        vs = np.bincount(inv, weights=v[order], minlength=ux.size)
        xs = ux
    else:
        ws = w[order]
        vs = v[order]
    fitted = np.asarray(_riesz_pava(ws.tolist(), vs.tolist(), lo, hi))
    return _compress_steps(xs, fitted)


def fit_riesz_isotonic(points, bounds) -> Calibrator:
    """Minimize ``sum_p w_p g(x_p)^2 - 2 v_p g(x_p)`` over clamped step functions.

    ``points`` is a sequence of :class:`PointLoss`; duplicates in x are
    aggregated. The per-block solution is ``clip(sum v / sum w, lo, hi)``;
    blocks with zero quadratic mass take the clamp endpoint consistent with
    monotonicity.
    """
    lo, hi = float(bounds[0]), float(bounds[1])
    if not lo < hi:
        raise BoundsError(f"need lo < hi, got [{lo}, {hi}]")
    pts = list(points)
    if not pts:
        raise ValueError("points must be nonempty")
    x = np.array([p.x for p in pts], dtype=float)
    w = np.array([p.w for p in pts], dtype=float)
    v = np.array([p.v for p in pts], dtype=float)
    if np.any(w < 0):
        raise ValueError("quadratic weights must be nonnegative")
    return _fit_riesz_arrays(x, w, v, lo, hi)
