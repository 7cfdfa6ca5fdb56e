"""Isotonic calibration of pooled out-of-fold nuisance predictions.

Outcome regressions are calibrated per arm by isotonic least squares of the
observed outcome on the prediction (by default restricted to rows assigned to
that arm). Propensities are calibrated by isotonic least squares of the arm
indicator on the predicted propensity over all rows, after which the inverse
weights are truncated at the smallest calibrated propensity among that arm's
own rows. The calibrators are always fit on the full pooled sample, never
cross-fit.

Calibration forces exact per-bin score equations: within every constant
segment of a calibrator, the average residual of its regression problem is
zero. Those equations are what remove the first-order cross-product bias of
the one-step estimator.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, NuisanceMatrix
from .errors import BoundsError, DegenerateArmError
from .isotonic import Calibrator, _fit_riesz_arrays, fit_ls_isotonic


@dataclass(frozen=True)
class CalibratedNuisances:
    """Calibrated nuisance columns plus the calibrators that produced them.

    ``alpha_star[i, a]`` is ``1(A_i = a) / max(pi_star[i, a], trunc[a])`` and
    is zero off-arm; ``pi_star`` itself is stored untruncated. Columns for
    arms that were not requested are NaN with calibrator ``None``.
    """

    mu_star: np.ndarray
    pi_star: np.ndarray
    alpha_star: np.ndarray
    outcome_calibrators: tuple
    propensity_calibrators: tuple
    trunc: np.ndarray
    stratified_outcome: bool

    def __post_init__(self):
        for arr in (self.mu_star, self.pi_star, self.alpha_star, self.trunc):
            arr.setflags(write=False)


def calibrate_outcome(
    data: Dataset, nuisances: NuisanceMatrix, arm: int, stratified: bool = True
) -> tuple[Calibrator, np.ndarray]:
    """Calibrate the outcome regression for one arm.

    With ``stratified=True`` (the default treatment-effect path) the isotonic
    fit uses only rows assigned to the arm, regressing Y on the out-of-fold
    prediction for that arm; the fitted step function is then applied to every
    row's prediction. With ``stratified=False`` the fit pools all rows against
    the prediction at each row's own arm.
    """
    column = nuisances.mu[:, arm]
    if stratified:
        mask = data.arm_indicator(arm)
        if not mask.any():
            raise DegenerateArmError(f"no observations with arm code {arm}")
        calibrator = fit_ls_isotonic(column[mask], data.outcome[mask])
    else:
        own_arm_pred = nuisances.mu[np.arange(data.n), data.treatment]
        calibrator = fit_ls_isotonic(own_arm_pred, data.outcome)
    return calibrator, calibrator.predict(column)


def calibrate_propensity(
    data: Dataset, nuisances: NuisanceMatrix, arm: int
) -> tuple[Calibrator, np.ndarray, float]:
    """Calibrate the propensity for one arm and compute its truncation level.

    Isotonic least squares of the arm indicator on the predicted propensity
    over all rows; the truncation level is the minimum calibrated value among
    the arm's own rows (necessarily positive, since each such row's bin
    contains the row itself).
    """
    mask = data.arm_indicator(arm)
    if not mask.any():
        raise DegenerateArmError(f"no observations with arm code {arm}")
    column = nuisances.pi[:, arm]
    calibrator = fit_ls_isotonic(column, mask.astype(float))
    pi_star = calibrator.predict(column)
    trunc = float(pi_star[mask].min())
    return calibrator, pi_star, trunc


def calibrate_nuisances(
    data: Dataset,
    nuisances: NuisanceMatrix,
    arms=None,
    stratified_outcome: bool = True,
) -> CalibratedNuisances:
    """Calibrate outcome and propensity columns for the requested arms."""
    if arms is None:
        arms = range(data.n_arms)
    arms = [int(a) for a in arms]
    shape = (data.n, data.n_arms)
    mu_star = np.full(shape, np.nan)
    pi_star = np.full(shape, np.nan)
    alpha_star = np.full(shape, np.nan)
    trunc = np.full(data.n_arms, np.nan)
    out_cals: list = [None] * data.n_arms
    prop_cals: list = [None] * data.n_arms
    for arm in arms:
        out_cals[arm], mu_star[:, arm] = calibrate_outcome(
            data, nuisances, arm, stratified=stratified_outcome
        )
        prop_cals[arm], pi_star[:, arm], trunc[arm] = calibrate_propensity(data, nuisances, arm)
        indicator = data.arm_indicator(arm)
        alpha_star[:, arm] = np.where(
            indicator, 1.0 / np.maximum(pi_star[:, arm], trunc[arm]), 0.0
        )
    return CalibratedNuisances(
        mu_star=mu_star,
        pi_star=pi_star,
        alpha_star=alpha_star,
        outcome_calibrators=tuple(out_cals),
        propensity_calibrators=tuple(prop_cals),
        trunc=trunc,
        stratified_outcome=stratified_outcome,
    )


def calibrate_riesz_generic(alpha_obs, alpha_eval, bounds=None) -> Calibrator:
    """Calibrate inverse-weight values directly under the quadratic balancing loss.

    ``alpha_obs`` holds the weight estimate evaluated at each observation's
    own arm, ``alpha_eval`` the estimate at the intervened arm. Minimizes
    ``sum_i g(alpha_obs_i)^2 - 2 sum_i g(alpha_eval_i)`` over nondecreasing
    step functions clamped to ``bounds``; per distinct value, the quadratic
    mass is the observed count and the linear mass the evaluation count.
    Default bounds are [0, n], wide enough never to bind for counterfactual
    means (a calibrated inverse weight cannot exceed n).
    """
    obs = np.asarray(alpha_obs, dtype=float)
    ev = np.asarray(alpha_eval, dtype=float)
    if obs.ndim != 1 or obs.shape != ev.shape or obs.size == 0:
        raise ValueError("alpha_obs and alpha_eval must be equal-length nonempty vectors")
    if not (np.all(np.isfinite(obs)) and np.all(np.isfinite(ev))):
        raise ValueError("alpha values must be finite")
    n = obs.size
    if bounds is None:
        bounds = (0.0, float(n))
    ux, inv = np.unique(np.concatenate([obs, ev]), return_inverse=True)
    w = np.bincount(inv[:n], minlength=ux.size).astype(float)
    v = np.bincount(inv[n:], minlength=ux.size).astype(float)
    lo, hi = float(bounds[0]), float(bounds[1])
    if not lo < hi:
        raise BoundsError(f"need lo < hi, got [{lo}, {hi}]")
    return _fit_riesz_arrays(ux, w, v, lo, hi)
