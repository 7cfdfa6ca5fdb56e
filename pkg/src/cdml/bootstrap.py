"""Bootstrap-assisted doubly robust confidence intervals.

Each replicate resamples with replacement *within* each fold (preserving fold
sizes and labels), refits only the isotonic calibrators on the pooled
resample, and recomputes the calibrated one-step estimate. The initial
out-of-fold nuisance predictions are never refit, so a replicate costs little
more than two isotonic regressions per arm.

A resample is summarized by a vector of draw counts per original row; every
quantity entering the calibrators and the estimate is a count-weighted
aggregate over the fixed prediction values, which keeps replicates cheap and
makes results independent of worker scheduling.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from ._util import parallel_map, resolve_workers
from .calibration import calibrate_nuisances
from .data import Dataset, NuisanceMatrix
from .errors import BootstrapError
from .estimators import ate_cdml, counterfactual_mean_cdml
from .isotonic import _pava

MAX_DROP_FRACTION = 0.01


@dataclass(frozen=True)
class BootstrapResult:
    """Replicate estimates and the intervals built from them.

    ``replicate_estimates`` holds only the kept (non-degenerate) replicates;
    ``dropped`` counts resamples in which a required arm was absent.
    ``sigma_hat`` is the standard deviation of the kept replicates (the
    1/K-normalized form).
    """

    point_estimate: float
    replicate_estimates: np.ndarray
    sigma_hat: float
    normal_ci: tuple[float, float]
    percentile_ci: tuple[float, float]
    dropped: int
    n_requested: int
    level: float

    def __post_init__(self):
        self.replicate_estimates.setflags(write=False)

    def to_dict(self) -> dict:
        return {
            "point_estimate": self.point_estimate,
            "sigma_hat": self.sigma_hat,
            "normal_ci": list(self.normal_ci),
            "percentile_ci": list(self.percentile_ci),
            "dropped": self.dropped,
            "n_replicates": self.n_requested,
            "level": self.level,
        }


def _arm_structures(data: Dataset, nuis: NuisanceMatrix, arm: int) -> dict:
    mu_values, mu_inv = np.unique(nuis.mu[:, arm], return_inverse=True)
    pi_values, pi_inv = np.unique(nuis.pi[:, arm], return_inverse=True)
    return {
        "treated": (data.treatment == arm).astype(float),
        "mu_inv": mu_inv,
        "n_mu_bins": mu_values.size,
        "pi_inv": pi_inv,
        "n_pi_bins": pi_values.size,
    }


def _step_levels(fitted: np.ndarray, trained: np.ndarray) -> np.ndarray:
    """Extend fitted block values to all value bins (right-continuous fill)."""
    pos = np.cumsum(trained) - 1
    return fitted[np.maximum(pos, 0)]


def _arm_estimate_from_counts(counts: np.ndarray, outcome: np.ndarray, pre: dict) -> float:
    """Calibrated one-step counterfactual mean on a resample given by counts.

    Returns NaN when the resample contains no observation from the arm.
    """
    treated_draws = counts * pre["treated"]
    if treated_draws.sum() == 0.0:
        return np.nan

    # outcome calibrator: isotonic LS of Y on mu-hat over the arm's drawn rows
    w_mu = np.bincount(pre["mu_inv"], weights=treated_draws, minlength=pre["n_mu_bins"])
    wy_mu = np.bincount(
        pre["mu_inv"], weights=treated_draws * outcome, minlength=pre["n_mu_bins"]
    )
    trained = w_mu > 0.0
    fitted = np.asarray(_pava((wy_mu[trained] / w_mu[trained]).tolist(), w_mu[trained].tolist()))
    mu_star = _step_levels(fitted, trained)[pre["mu_inv"]]

    # propensity calibrator: isotonic LS of the arm indicator on pi-hat over all drawn rows
    w_pi = np.bincount(pre["pi_inv"], weights=counts, minlength=pre["n_pi_bins"])
    wy_pi = np.bincount(pre["pi_inv"], weights=treated_draws, minlength=pre["n_pi_bins"])
    trained_pi = w_pi > 0.0
    fitted_pi = np.asarray(
        _pava((wy_pi[trained_pi] / w_pi[trained_pi]).tolist(), w_pi[trained_pi].tolist())
    )
    pi_star = _step_levels(fitted_pi, trained_pi)[pre["pi_inv"]]

    trunc = pi_star[treated_draws > 0.0].min()
    alpha = pre["treated"] / np.maximum(pi_star, trunc)
    contrib = mu_star + alpha * (outcome - mu_star)
    return float(counts @ contrib / counts.sum())


def _replicate_counts(fold_rows: list[np.ndarray], n: int, rng: np.random.Generator) -> np.ndarray:
    counts = np.zeros(n, dtype=np.int64)
    for rows in fold_rows:
        draws = rows[rng.integers(0, rows.size, rows.size)]
        counts += np.bincount(draws, minlength=n)
    return counts.astype(float)


def _run_chunk(task) -> list[float]:
    payload, entries = task
    outcome = payload["outcome"]
    fold_rows = payload["fold_rows"]
    n = outcome.size
    out = []
    for seed in entries:
        rng = np.random.default_rng(seed)
        counts = _replicate_counts(fold_rows, n, rng)
        estimates = [
            _arm_estimate_from_counts(counts, outcome, pre) for pre in payload["arms"]
        ]
        if any(np.isnan(e) for e in estimates):
            out.append(np.nan)
        elif len(estimates) == 2:
            out.append(estimates[0] - estimates[1])
        else:
            out.append(estimates[0])
    return out


def bootstrap_ci(
    data: Dataset,
    nuisances: NuisanceMatrix,
    arms,
    n_replicates: int = 1000,
    level: float = 0.95,
    seed: int | np.random.SeedSequence = 0,
    n_workers: int | None = None,
    dump_path=None,
    max_drop_fraction: float = MAX_DROP_FRACTION,
) -> BootstrapResult:
    """Bootstrap the calibrated one-step estimator, refitting only calibrators.

    ``arms`` is a single arm code (counterfactual mean) or a pair
    ``(arm1, arm0)`` (contrast). Replicates in which a required arm is absent
    from the resample are dropped and counted; if more than
    ``max_drop_fraction`` of replicates are degenerate a BootstrapError is
    raised. The normal interval is symmetric about the full-sample point
    estimate; the percentile interval subtracts empirical quantiles of the
    mean-centered replicates.
    """
    if n_replicates < 100:
        raise ValueError("use at least 100 bootstrap replicates")
    if isinstance(arms, (tuple, list)):
        arm_list = [int(a) for a in arms]
        if len(arm_list) != 2:
            raise ValueError("arms must be a single code or a pair")
    else:
        arm_list = [int(arms)]

    calibrated = calibrate_nuisances(data, nuisances, arms=arm_list)
    if len(arm_list) == 2:
        tau_star, _ = ate_cdml(data, calibrated, arm_list[0], arm_list[1])
    else:
        tau_star, _ = counterfactual_mean_cdml(data, calibrated, arm_list[0])

    payload = {
        "outcome": data.outcome,
        "fold_rows": data.fold_indices(),
        "arms": [_arm_structures(data, nuisances, a) for a in arm_list],
    }
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seeds = root.spawn(n_replicates)
    workers = resolve_workers(n_workers)
    n_chunks = min(max(workers * 4, 1), n_replicates) if workers > 1 else 1
    chunks = np.array_split(np.arange(n_replicates), n_chunks)
    tasks = [(payload, [seeds[k] for k in chunk]) for chunk in chunks if chunk.size]
    estimates = np.asarray(
        [e for part in parallel_map(_run_chunk, tasks, workers) for e in part]
    )

    kept = estimates[np.isfinite(estimates)]
    dropped = int(n_replicates - kept.size)
    if dropped > max_drop_fraction * n_replicates:
        raise BootstrapError(
            f"{dropped} of {n_replicates} bootstrap replicates were degenerate "
            f"(an arm was absent from the resample)"
        )
    if dump_path is not None:
        with open(dump_path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["replicate", "estimate", "status"])
            for k, est in enumerate(estimates):
                if np.isfinite(est):
                    writer.writerow([k, repr(float(est)), "kept"])
                else:
                    writer.writerow([k, "", "dropped"])

    sigma = float(kept.std(ddof=0))
    z = float(norm.ppf(0.5 + level / 2.0))
    normal_ci = (tau_star - z * sigma, tau_star + z * sigma)
    rho = 1.0 - level
    centered = kept - kept.mean()
    percentile_ci = (
        tau_star - float(np.quantile(centered, 1.0 - rho / 2.0)),
        tau_star - float(np.quantile(centered, rho / 2.0)),
    )
    return BootstrapResult(
        point_estimate=tau_star,
        replicate_estimates=kept,
        sigma_hat=sigma,
        normal_ci=normal_ci,
        percentile_ci=percentile_ci,
        dropped=dropped,
        n_requested=n_replicates,
        level=level,
    )
