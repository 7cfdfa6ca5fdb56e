"""J-fold training of nuisance learners and stitching of out-of-fold predictions.

For each fold, both learners are fit on the complementary folds and their
predictions fill that fold's rows of the NuisanceMatrix, so no entry was
produced by a model that saw its own row. Calibration later consumes the
pooled out-of-fold predictions; it is never cross-fitted itself.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import PI_FLOOR, Dataset, NuisanceMatrix, validate_nuisances
from .errors import DegenerateFoldError, LearnerError
from .learners import (
    default_bandwidth_grid,
    fit_kernel_stratified,
    fit_logistic_main_terms,
    predict_kernel,
    predict_logistic,
)

OUTCOME_MODELS = ("kernel_stratified", "logistic_main_terms", "external")
PROPENSITY_MODELS = OUTCOME_MODELS


@dataclass(frozen=True)
class LearnerSpec:
    """Which learner estimates each nuisance, plus kernel CV settings.

    The kernel learners implement the simulation study's wiring: covariate
    column 0 is the smoothing axis and covariate column 1 the discrete
    stratification variable (the outcome smoother additionally stratifies by
    arm). ``external`` means predictions are supplied as columns and
    cross-fitting is skipped.
    """

    outcome_model: str = "kernel_stratified"
    propensity_model: str = "kernel_stratified"
    bandwidth_grid: np.ndarray | None = None
    cv_folds: int = 5

    def __post_init__(self):
        if self.outcome_model not in OUTCOME_MODELS:
            raise ValueError(f"unknown outcome model {self.outcome_model!r}")
        if self.propensity_model not in PROPENSITY_MODELS:
            raise ValueError(f"unknown propensity model {self.propensity_model!r}")
        if (self.outcome_model == "external") != (self.propensity_model == "external"):
            raise ValueError("external nuisances must be external for both models")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be at least 2")

    @property
    def is_external(self) -> bool:
        return self.outcome_model == "external"


def _stratum_levels(data: Dataset) -> np.ndarray:
    if data.n_covariates < 2:
        raise LearnerError(
            "kernel learners need at least two covariate columns "
            "(column 0 smooths, column 1 stratifies)"
        )
    return np.unique(data.covariates[:, 1])


def _stratum_codes(values: np.ndarray, levels: np.ndarray) -> np.ndarray:
    codes = np.searchsorted(levels, values)
    codes = np.clip(codes, 0, levels.size - 1)
    if np.any(levels[codes] != values):
        raise LearnerError("stratification column contains values unseen in the full data")
    return codes


def _require_binary(data: Dataset, what: str) -> None:
    if data.n_arms != 2:
        raise LearnerError(
            f"built-in {what} learners support binary arm sets; "
            "supply external nuisance columns for more arms"
        )


def _grid(spec: LearnerSpec, x: np.ndarray) -> np.ndarray:
    return spec.bandwidth_grid if spec.bandwidth_grid is not None else default_bandwidth_grid(x)


def _fit_predict_outcome(
    data: Dataset,
    spec: LearnerSpec,
    train: np.ndarray,
    test: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Predictions mu_hat(a, W_i) for every arm a, rows of `test`."""
    W = data.covariates
    preds = np.empty((test.size, data.n_arms))
    if spec.outcome_model == "logistic_main_terms":
        _require_binary(data, "outcome")
        X_train = np.column_stack([data.treatment[train].astype(float), W[train]])
        fit = fit_logistic_main_terms(X_train, data.outcome[train])
        for arm in range(data.n_arms):
            X_test = np.column_stack([np.full(test.size, float(arm)), W[test]])
            preds[:, arm] = predict_logistic(fit, X_test)
        return preds

    levels = _stratum_levels(data)
    w2_train = _stratum_codes(W[train, 1], levels)
    w2_test = _stratum_codes(W[test, 1], levels)
    strata_train = data.treatment[train] * levels.size + w2_train
    fit = fit_kernel_stratified(
        W[train, 0],
        data.outcome[train],
        strata_train,
        bandwidth_grid=_grid(spec, W[train, 0]),
        cv_folds=spec.cv_folds,
        rng=rng,
    )
    for arm in range(data.n_arms):
        strata_test = arm * levels.size + w2_test
        preds[:, arm] = predict_kernel(fit, W[test, 0], strata_test)
    return preds


def _fit_predict_propensity(
    data: Dataset,
    spec: LearnerSpec,
    train: np.ndarray,
    test: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Predictions pi_hat(a | W_i) for every arm a, rows of `test`."""
    _require_binary(data, "propensity")
    W = data.covariates
    indicator = (data.treatment[train] == 1).astype(float)
    if spec.propensity_model == "logistic_main_terms":
        fit = fit_logistic_main_terms(W[train], indicator)
        p1 = predict_logistic(fit, W[test])
    else:
        levels = _stratum_levels(data)
        fit = fit_kernel_stratified(
            W[train, 0],
            indicator,
            _stratum_codes(W[train, 1], levels),
            bandwidth_grid=_grid(spec, W[train, 0]),
            cv_folds=spec.cv_folds,
            rng=rng,
        )
        p1 = predict_kernel(fit, W[test, 0], _stratum_codes(W[test, 1], levels))
    return np.column_stack([1.0 - p1, p1])


def crossfit_nuisances(
    data: Dataset,
    spec: LearnerSpec,
    seed: int | np.random.SeedSequence = 0,
    external: NuisanceMatrix | None = None,
) -> NuisanceMatrix:
    """Fill a NuisanceMatrix with out-of-fold predictions.

    For each fold s, outcome and propensity learners are fit on all data
    except fold s and predict the rows of fold s. Propensities are clipped
    into [1e-12, 1 - 1e-12] before storage. With an external spec the
    supplied matrix is validated and echoed unchanged.
    """
    if spec.is_external:
        if external is None:
            raise LearnerError("external learner spec requires supplied nuisance columns")
        return external
    if data.n_folds < 2:
        raise DegenerateFoldError("cross-fitting requires at least 2 folds")

    mu = np.empty((data.n, data.n_arms))
    pi = np.empty((data.n, data.n_arms))
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    fold_seeds = root.spawn(data.n_folds)
    for s, test in enumerate(data.fold_indices()):
        train = np.flatnonzero(data.fold_id != s + 1)
        present = np.unique(data.treatment[train])
        if present.size != data.n_arms:
            missing = sorted(set(range(data.n_arms)) - set(present.tolist()))
            raise DegenerateFoldError(
                f"training complement of fold {s + 1} is missing arm codes {missing}"
            )
        rng_outcome, rng_prop = (
            np.random.default_rng(child) for child in fold_seeds[s].spawn(2)
        )
        mu[test] = _fit_predict_outcome(data, spec, train, test, rng_outcome)
        pi[test] = _fit_predict_propensity(data, spec, train, test, rng_prop)

    pi = np.clip(pi, PI_FLOOR, 1.0 - PI_FLOOR)
    return validate_nuisances(data, mu, pi, source="builtin")
