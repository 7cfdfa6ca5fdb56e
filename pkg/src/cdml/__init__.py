"""Calibrated debiased machine learning.

Isotonic calibration of cross-fitted nuisance estimates followed by one-step
debiased estimation of counterfactual means, treatment-effect contrasts, and
the partial covariance, with bootstrap-assisted doubly robust confidence
intervals and a Monte Carlo harness.
"""

__version__ = "0.1.0"

from .bootstrap import BootstrapResult, bootstrap_ci
from .calibration import (
    CalibratedNuisances,
    calibrate_nuisances,
    calibrate_outcome,
    calibrate_propensity,
    calibrate_riesz_generic,
)
from .crossfit import LearnerSpec, crossfit_nuisances
from .data import (
    Dataset,
    NuisanceMatrix,
    Schema,
    assign_folds,
    external_nuisance_matrix,
    load_csv,
    validate_dataset,
    validate_nuisances,
    with_folds,
)
from .errors import (
    BootstrapError,
    BoundsError,
    CdmlError,
    DegenerateArmError,
    DegenerateFoldError,
    FoldError,
    LearnerError,
    SchemaError,
)
from .estimators import (
    EstimateReport,
    EstimatorConfig,
    aipw_estimate,
    ate_aipw,
    ate_cdml,
    cn_truncation,
    counterfactual_mean_cdml,
    ipw_estimate,
    partial_covariance_cdml,
    plugin_estimate,
    wald_ci,
)
from .isotonic import (
    Calibrator,
    PointLoss,
    fit_ls_isotonic,
    fit_riesz_isotonic,
    pava_weighted,
)
from .learners import (
    KernelFit,
    LogisticFit,
    default_bandwidth_grid,
    encode_strata,
    fit_kernel_stratified,
    fit_logistic_main_terms,
    predict_kernel,
    predict_logistic,
)
from .simulation import (
    MonteCarloResult,
    ScenarioConfig,
    run_experiment,
    sample_dgp,
    scenario_learner_spec,
    true_ate,
    true_outcome_regression,
    true_propensity,
)

__all__ = [
    "__version__",
    "BootstrapError",
    "BootstrapResult",
    "BoundsError",
    "CalibratedNuisances",
    "Calibrator",
    "CdmlError",
    "Dataset",
    "DegenerateArmError",
    "DegenerateFoldError",
    "EstimateReport",
    "EstimatorConfig",
    "FoldError",
    "KernelFit",
    "LearnerError",
    "LearnerSpec",
    "LogisticFit",
    "MonteCarloResult",
    "NuisanceMatrix",
    "PointLoss",
    "ScenarioConfig",
    "Schema",
    "SchemaError",
    "aipw_estimate",
    "assign_folds",
    "ate_aipw",
    "ate_cdml",
    "bootstrap_ci",
    "calibrate_nuisances",
    "calibrate_outcome",
    "calibrate_propensity",
    "calibrate_riesz_generic",
    "cn_truncation",
    "counterfactual_mean_cdml",
    "crossfit_nuisances",
    "default_bandwidth_grid",
    "encode_strata",
    "external_nuisance_matrix",
    "fit_kernel_stratified",
    "fit_logistic_main_terms",
    "fit_ls_isotonic",
    "fit_riesz_isotonic",
    "ipw_estimate",
    "load_csv",
    "partial_covariance_cdml",
    "pava_weighted",
    "plugin_estimate",
    "predict_kernel",
    "predict_logistic",
    "run_experiment",
    "sample_dgp",
    "scenario_learner_spec",
    "true_ate",
    "true_outcome_regression",
    "true_propensity",
    "validate_dataset",
    "validate_nuisances",
    "wald_ci",
    "with_folds",
]
