"""Monte Carlo study of treatment-effect estimators under nuisance misspecification.

The data-generating process draws W1 ~ Uniform(-2, 2) and W2 ~ Bernoulli(0.5)
independently, a binary treatment with propensity
``expit(-w1 + 2*w1*w2)``, and a binary outcome with regression
``expit(0.2*a - w1 + 2*w1*w2)``. Three scenarios wire the learners:

* ``both_consistent`` (a): kernel smoother for both nuisances;
* ``only_propensity`` (b): kernel propensity, misspecified main-terms
  logistic outcome model (the missing w1*w2 interaction makes it
  inconsistent);
* ``only_outcome`` (c): kernel outcome model, misspecified logistic
  propensity.

Each replicate computes the AIPW contrast with a Wald interval (propensities
clipped at c_n) and the calibrated one-step contrast with bootstrap
intervals, then metrics (bias, sd of estimates, coverage) are aggregated
against the exact average treatment effect of the design.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.special import expit

from ._util import parallel_map, resolve_workers
from .bootstrap import bootstrap_ci
from .calibration import calibrate_nuisances
from .crossfit import LearnerSpec, crossfit_nuisances
from .data import Dataset, assign_folds
from .estimators import ate_aipw, ate_cdml, wald_ci

SCHEMA_VERSION = 1

SCENARIOS = ("both_consistent", "only_propensity", "only_outcome")
_SCENARIO_ALIASES = {"a": "both_consistent", "b": "only_propensity", "c": "only_outcome"}

TREATMENT_SHIFT = 0.2
W1_HALF_WIDTH = 2.0


def canonical_scenario(name: str) -> str:
    name = str(name).lower()
    name = _SCENARIO_ALIASES.get(name, name)
    if name not in SCENARIOS:
        raise ValueError(f"unknown scenario {name!r}")
    return name


@dataclass(frozen=True)
class ScenarioConfig:
    """One cell of the study: scenario wiring, sizes, and the master seed."""

    scenario: str
    n: int
    reps: int = 500
    n_folds: int = 5
    boot_reps: int = 1000
    seed: int = 0
    level: float = 0.95

    def __post_init__(self):
        object.__setattr__(self, "scenario", canonical_scenario(self.scenario))
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.n < 2 * self.n_folds:
            raise ValueError("need n >= 2 * n_folds")
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must lie in (0, 1)")

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "n": self.n,
            "reps": self.reps,
            "n_folds": self.n_folds,
            "boot_reps": self.boot_reps,
            "seed": self.seed,
            "level": self.level,
        }


def true_propensity(w1, w2):
    """P(A = 1 | W) of the design."""
    return expit(-w1 + 2.0 * w1 * w2)


def true_outcome_regression(a, w1, w2):
    """E[Y | A = a, W] of the design."""
    return expit(TREATMENT_SHIFT * a - w1 + 2.0 * w1 * w2)


def sample_dgp(n: int, rng: np.random.Generator, n_folds: int = 5) -> Dataset:
    """Draw one dataset from the design, with folds assigned from the same stream."""
    w1 = rng.uniform(-W1_HALF_WIDTH, W1_HALF_WIDTH, n)
    w2 = rng.integers(0, 2, n).astype(float)
    a = (rng.uniform(size=n) < true_propensity(w1, w2)).astype(np.int64)
    y = (rng.uniform(size=n) < true_outcome_regression(a, w1, w2)).astype(float)
    fold_id = assign_folds(n, n_folds, rng)
    return Dataset(
        covariates=np.column_stack([w1, w2]),
        treatment=a,
        outcome=y,
        fold_id=fold_id,
        arms=(0, 1),
        outcome_bound=1.0,
    )


def true_ate() -> float:
    """Exact average treatment effect of the design.

    The W2 average is symmetric in w1, so the effect reduces to a single
    logistic integral with antiderivative log(1 + e^u):

        tau = (1/4) * [log(1 + e^(u + 0.2)) - log(1 + e^u)] between u = -2, 2.
    """
    upper, lower = W1_HALF_WIDTH, -W1_HALF_WIDTH

    def antiderivative(u):
        return np.log1p(np.exp(u + TREATMENT_SHIFT)) - np.log1p(np.exp(u))

    return float((antiderivative(upper) - antiderivative(lower)) / (2.0 * W1_HALF_WIDTH))


def scenario_learner_spec(scenario: str, cv_folds: int = 5) -> LearnerSpec:
    """Learner wiring per scenario; the inconsistent side is always logistic."""
    scenario = canonical_scenario(scenario)
    outcome = "kernel_stratified"
    propensity = "kernel_stratified"
    if scenario == "only_propensity":
        outcome = "logistic_main_terms"
    elif scenario == "only_outcome":
        propensity = "logistic_main_terms"
    return LearnerSpec(outcome_model=outcome, propensity_model=propensity, cv_folds=cv_folds)


def _run_replicate(task) -> dict:
    cfg, rep, seed_seq = task
    data_seed, fit_seed, boot_seed = seed_seq.spawn(3)
    try:
        rng = np.random.default_rng(data_seed)
        data = sample_dgp(cfg.n, rng, n_folds=cfg.n_folds)
        spec = scenario_learner_spec(cfg.scenario)
        nuis = crossfit_nuisances(data, spec, seed=fit_seed)

        aipw_tau, aipw_eif = ate_aipw(data, nuis, 1, 0)
        aipw_se, aipw_lo, aipw_hi = wald_ci(aipw_tau, aipw_eif, cfg.level)

        calibrated = calibrate_nuisances(data, nuis, arms=(0, 1))
        cdml_tau, cdml_eif = ate_cdml(data, calibrated, 1, 0)
        boot = bootstrap_ci(
            data,
            nuis,
            arms=(1, 0),
            n_replicates=cfg.boot_reps,
            level=cfg.level,
            seed=boot_seed,
            n_workers=1,
        )
    except Exception as exc:  # noqa: BLE001 - annotate with the replicate index
        raise type(exc)(f"replicate {rep}: {exc}") from exc
    return {
        "rep": rep,
        "aipw_tau": aipw_tau,
        "aipw_se": aipw_se,
        "aipw_lo": aipw_lo,
        "aipw_hi": aipw_hi,
        "cdml_tau": cdml_tau,
        "cdml_if_sd": float(np.asarray(cdml_eif).std(ddof=1)),
        "cdml_sigma_boot": boot.sigma_hat,
        "cdml_lo": boot.normal_ci[0],
        "cdml_hi": boot.normal_ci[1],
        "cdml_plo": boot.percentile_ci[0],
        "cdml_phi": boot.percentile_ci[1],
        "boot_dropped": boot.dropped,
    }


@dataclass(frozen=True)
class MonteCarloResult:
    """Per-replicate estimates with aggregated bias, SE, and coverage."""

    config: ScenarioConfig
    tau_true: float
    replicates: pd.DataFrame
    summary: dict

    def write_replicates_csv(self, path) -> None:
        self.replicates.to_csv(path, index=False)

    def write_metrics_json(self, path) -> None:
        payload = {
            "schema_version": SCHEMA_VERSION,
            "config": self.config.to_dict(),
            "tau_true": self.tau_true,
            "metrics": self.summary,
        }
        with open(path, "w") as handle:
            json.dump(payload, handle, indent=2, sort_keys=True)
            handle.write("\n")

    def write_long_csv(self, path) -> None:
        """Long-format metrics table: one row per (estimator, metric)."""
        rows = []
        for estimator, metrics in self.summary.items():
            for metric, value in metrics.items():
                rows.append(
                    {
                        "scenario": self.config.scenario,
                        "n": self.config.n,
                        "estimator": estimator,
                        "metric": metric,
                        "value": value,
                    }
                )
        pd.DataFrame(rows).to_csv(path, index=False)

    def summary_table(self) -> str:
        lines = [f"scenario={self.config.scenario} n={self.config.n} "
                 f"reps={self.config.reps} tau_true={self.tau_true:.6f}"]
        header = f"{'estimator':<18}{'bias':>12}{'se':>12}{'coverage':>10}"
        lines.append(header)
        for estimator, metrics in self.summary.items():
            lines.append(
                f"{estimator:<18}{metrics['bias']:>12.5f}{metrics['se']:>12.5f}"
                f"{metrics['coverage']:>10.3f}"
            )
        return "\n".join(lines)


def _coverage(lo: pd.Series, hi: pd.Series, target: float) -> float:
    return float(((lo <= target) & (target <= hi)).mean())


def summarize_replicates(frame: pd.DataFrame, tau_true: float) -> dict:
    """Bias, sd of estimates, and CI coverage per estimator."""
    return {
        "aipw": {
            "bias": float(frame["aipw_tau"].mean() - tau_true),
            "se": float(frame["aipw_tau"].std(ddof=1)) if len(frame) > 1 else 0.0,
            "coverage": _coverage(frame["aipw_lo"], frame["aipw_hi"], tau_true),
        },
        "cdml": {
            "bias": float(frame["cdml_tau"].mean() - tau_true),
            "se": float(frame["cdml_tau"].std(ddof=1)) if len(frame) > 1 else 0.0,
            "coverage": _coverage(frame["cdml_lo"], frame["cdml_hi"], tau_true),
        },
        "cdml_percentile": {
            "bias": float(frame["cdml_tau"].mean() - tau_true),
            "se": float(frame["cdml_tau"].std(ddof=1)) if len(frame) > 1 else 0.0,
            "coverage": _coverage(frame["cdml_plo"], frame["cdml_phi"], tau_true),
        },
    }


def run_experiment(cfg: ScenarioConfig, n_workers: int | None = None) -> MonteCarloResult:
    """Run the Monte Carlo loop for one scenario cell.

    Replicates are independent tasks with their own seed streams derived from
    the master seed, so results do not depend on the worker count.
    """
    workers = resolve_workers(n_workers)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.reps)
    tasks = [(cfg, rep, seeds[rep]) for rep in range(cfg.reps)]
    rows = parallel_map(_run_replicate, tasks, workers)
    frame = pd.DataFrame(rows).sort_values("rep").reset_index(drop=True)
    tau0 = true_ate()
    frame.insert(1, "tau_true", tau0)
    return MonteCarloResult(
        config=cfg,
        tau_true=tau0,
        replicates=frame,
        summary=summarize_replicates(frame, tau0),
    )
