"""Point estimators, influence-function variances, and report containers.

All estimators are plain functions of a validated Dataset plus nuisance
predictions and return the point estimate together with the centered
per-observation influence values used for Wald standard errors. The
calibrated one-step estimator applies no extra propensity clipping beyond the
min-over-own-arm truncation already baked into ``alpha_star``; the AIPW and
IPW comparators clip propensities to ``[c_n, 1 - c_n]`` with
``c_n = 25 / (sqrt(n) * log(n))``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .calibration import CalibratedNuisances
from .data import Dataset, NuisanceMatrix
from .isotonic import fit_ls_isotonic

ESTIMATORS = ("plugin", "ipw", "aipw", "cdml", "partial_cov")
CI_METHODS = ("wald", "bootstrap_normal", "bootstrap_percentile")

WALD_CDML_CAVEAT = (
    "wald interval for the calibrated estimator is valid only if both "
    "nuisance estimators are consistent; prefer the bootstrap otherwise"
)


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimand and inference choices for a single estimation run."""

    estimator: str = "cdml"
    arms: int | tuple[int, int] = (1, 0)
    level: float = 0.95
    apply_cn_truncation: bool = True
    ci_method: str = "bootstrap_normal"

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.ci_method not in CI_METHODS:
            raise ValueError(f"unknown ci method {self.ci_method!r}")
        if not 0.0 < self.level < 1.0:
            raise ValueError("confidence level must lie in (0, 1)")
        if isinstance(self.arms, tuple) and len(self.arms) == 2 and self.arms[0] == self.arms[1]:
            raise ValueError("contrast requires two distinct arms")


@dataclass(frozen=True)
class EstimateReport:
    """Point estimate, interval, and diagnostics for one estimation run."""

    tau_hat: float
    se: float
    ci_lower: float
    ci_upper: float
    level: float
    estimator: str
    ci_method: str
    n_used: int
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.se < 0:
            raise ValueError("standard error must be nonnegative")
        if self.ci_method in ("wald", "bootstrap_normal"):
            if not self.ci_lower <= self.tau_hat <= self.ci_upper:
                raise ValueError("interval must contain the point estimate")

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "tau_hat": self.tau_hat,
            "se": self.se,
            "ci_lower": self.ci_lower,
            "ci_upper": self.ci_upper,
            "level": self.level,
            "estimator": self.estimator,
            "ci_method": self.ci_method,
            "n_used": self.n_used,
            "diagnostics": self.diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def cn_truncation(n: int) -> float:
    """Propensity clipping level ``25 / (sqrt(n) * log(n))`` for IPW/AIPW."""
    c = 25.0 / (math.sqrt(n) * math.log(n))
    if c >= 0.5:
        raise ValueError(f"c_n = {c:.4g} >= 0.5; n = {n} is too small for the clipping rule")
    return c


def _mu_matrix(nuisances) -> np.ndarray:
    if isinstance(nuisances, CalibratedNuisances):
        return nuisances.mu_star
    if isinstance(nuisances, NuisanceMatrix):
        return nuisances.mu
    raise TypeError("expected NuisanceMatrix or CalibratedNuisances")


def counterfactual_mean_cdml(
    data: Dataset, calibrated: CalibratedNuisances, arm: int
) -> tuple[float, np.ndarray]:
    """Calibrated one-step estimate of E[Y(arm)] with its influence values.

    tau = mean_i[ mu*(arm, W_i) + alpha*(arm)_i * (Y_i - mu*(arm, W_i)) ];
    the returned influence values are the summands centered at tau.
    """
    mu = calibrated.mu_star[:, arm]
    alpha = calibrated.alpha_star[:, arm]
    values = mu + alpha * (data.outcome - mu)
    tau = float(values.mean())
    return tau, values - tau


def ate_cdml(
    data: Dataset, calibrated: CalibratedNuisances, arm1: int, arm0: int
) -> tuple[float, np.ndarray]:
    """Calibrated one-step contrast E[Y(arm1)] - E[Y(arm0)]."""
    tau1, eif1 = counterfactual_mean_cdml(data, calibrated, arm1)
    tau0, eif0 = counterfactual_mean_cdml(data, calibrated, arm0)
    return tau1 - tau0, eif1 - eif0


def plugin_estimate(data: Dataset, nuisances, arm: int) -> float:
    """G-computation plug-in: the mean of the outcome-regression column."""
    return float(_mu_matrix(nuisances)[:, arm].mean())


def _clipped_pi(data: Dataset, nuisances: NuisanceMatrix, arm: int, apply_cn: bool) -> np.ndarray:
    pi = nuisances.pi[:, arm]
    if apply_cn:
        c = cn_truncation(data.n)
        pi = np.clip(pi, c, 1.0 - c)
    return pi


def ipw_estimate(
    data: Dataset, nuisances: NuisanceMatrix, arm: int, apply_cn: bool = True
) -> float:
    """Inverse probability weighting with clipped propensities."""
    pi = _clipped_pi(data, nuisances, arm, apply_cn)
    indicator = data.arm_indicator(arm)
    return float(np.mean(indicator * data.outcome / pi))


def aipw_estimate(
    data: Dataset, nuisances: NuisanceMatrix, arm: int, apply_cn: bool = True
) -> tuple[float, np.ndarray]:
    """One-step debiased (AIPW) estimate with uncalibrated nuisances."""
    mu = nuisances.mu[:, arm]
    pi = _clipped_pi(data, nuisances, arm, apply_cn)
    indicator = data.arm_indicator(arm)
    values = mu + indicator / pi * (data.outcome - mu)
    tau = float(values.mean())
    return tau, values - tau


def ate_aipw(
    data: Dataset, nuisances: NuisanceMatrix, arm1: int, arm0: int, apply_cn: bool = True
) -> tuple[float, np.ndarray]:
    """AIPW contrast between two arms."""
    tau1, eif1 = aipw_estimate(data, nuisances, arm1, apply_cn)
    tau0, eif0 = aipw_estimate(data, nuisances, arm0, apply_cn)
    return tau1 - tau0, eif1 - eif0


def wald_ci(tau_hat: float, eif_values, level: float) -> tuple[float, float, float]:
    """Influence-function Wald interval: tau +- z * sd(eif)/sqrt(n)."""
    eif = np.asarray(eif_values, dtype=float)
    n = eif.size
    se = float(eif.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    z = float(norm.ppf(0.5 + level / 2.0))
    return se, tau_hat - z * se, tau_hat + z * se


def partial_covariance_cdml(
    exposure, outcome, outcome_regression, exposure_regression
) -> tuple[float, np.ndarray]:
    """Calibrated partial covariance of an exposure and outcome given covariates.

    Both cross-fitted regressions (E[Y|W] and E[X|W], evaluated out of fold at
    each observation) are isotonic-least-squares calibrated against their own
    targets, then the estimate is the mean cross-product of the two calibrated
    residuals. The returned influence values are the centered per-observation
    products.
    """
    x = np.asarray(exposure, dtype=float)
    y = np.asarray(outcome, dtype=float)
    m_hat = np.asarray(outcome_regression, dtype=float)
    e_hat = np.asarray(exposure_regression, dtype=float)
    if not (x.shape == y.shape == m_hat.shape == e_hat.shape) or x.ndim != 1:
        raise ValueError("all inputs must be equal-length 1-d vectors")
    m_star = fit_ls_isotonic(m_hat, y).predict(m_hat)
    e_star = fit_ls_isotonic(e_hat, x).predict(e_hat)
    values = (x - e_star) * (y - m_star)
    tau = float(values.mean())
    return tau, values - tau
