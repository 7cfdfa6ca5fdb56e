"""Acceptance suite: one test per criterion, one printed pass/fail line each.

The Monte Carlo criteria run the study at desk scale and take tens of
minutes on two cores; run `pytest tests/test_acceptance.py -v -s` to watch
the per-criterion lines appear.
"""
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from cdml import (
    calibrate_nuisances,
    calibrate_propensity,
    calibrate_riesz_generic,
    crossfit_nuisances,
    partial_covariance_cdml,
    pava_weighted,
    sample_dgp,
    validate_nuisances,
)
from cdml.crossfit import LearnerSpec
from cdml.simulation import ScenarioConfig, run_experiment
from oracles import brute_force_isotonic

WORKERS = 2


def _verdict(criterion: str, ok: bool, detail: str) -> None:
    status = "PASS" if ok else "FAIL"
    print(f"[{criterion}] {status} — {detail}", flush=True)
    assert ok, f"{criterion}: {detail}"


def _fast_nuisances(data, seed):
    spec = LearnerSpec(
        outcome_model="logistic_main_terms", propensity_model="logistic_main_terms"
    )
    return crossfit_nuisances(data, spec, seed=seed)


@pytest.fixture(scope="module")
def scenario_b():
    cfg = ScenarioConfig(scenario="b", n=1000, reps=500, boot_reps=1000, seed=20260801)
    return run_experiment(cfg, n_workers=WORKERS)


@pytest.fixture(scope="module")
def scenario_c():
    cfg = ScenarioConfig(scenario="c", n=1000, reps=500, boot_reps=1000, seed=20260802)
    return run_experiment(cfg, n_workers=WORKERS)


@pytest.fixture(scope="module")
def scenario_a():
    cfg = ScenarioConfig(scenario="a", n=2000, reps=300, boot_reps=1000, seed=20260803)
    return run_experiment(cfg, n_workers=WORKERS)


def test_criterion_01_score_equation_exactness():
    """Per-bin outcome and propensity score equations hold to 1e-8."""
    t0 = time.time()
    rng = np.random.default_rng(101)
    worst = 0.0
    for rep in range(100):
        data = sample_dgp(500, rng, n_folds=5)
        nuis = _fast_nuisances(data, seed=rep)
        cal = calibrate_nuisances(data, nuis)
        for arm in (0, 1):
            mask = data.arm_indicator(arm)
            mu_col = cal.mu_star[:, arm]
            for level in np.unique(mu_col[mask]):
                rows = mask & (mu_col == level)
                worst = max(worst, abs(float(np.sum(data.outcome[rows] - level))))
            pi_col = cal.pi_star[:, arm]
            indicator = mask.astype(float)
            for level in np.unique(pi_col):
                rows = pi_col == level
                worst = max(worst, abs(float(np.sum(indicator[rows] - level))))
    elapsed = time.time() - t0
    _verdict(
        "criterion 1: score-equation exactness",
        worst < 1e-8 and elapsed < 60,
        f"worst per-bin residual sum {worst:.2e} over 100 datasets in {elapsed:.1f} s",
    )


def test_criterion_02_pava_oracle_equivalence():
    """Production solver matches the grid-search oracle on 1000 instances."""
    t0 = time.time()
    rng = np.random.default_rng(202)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 7))
        y = rng.normal(size=n)
        w = rng.uniform(0.25, 4.0, size=n)
        diff = np.abs(pava_weighted(y, w) - brute_force_isotonic(y, w)).max()
        worst = max(worst, float(diff))
    elapsed = time.time() - t0
    _verdict(
        "criterion 2: PAVA oracle equivalence",
        worst < 1e-6 and elapsed < 60,
        f"worst deviation {worst:.2e} over 1000 instances in {elapsed:.1f} s",
    )


def test_criterion_03_risk_non_worsening():
    """Calibrated in-sample squared error never exceeds the uncalibrated one."""
    rng = np.random.default_rng(303)
    checked = 0
    for rep in range(20):
        data = sample_dgp(400, rng, n_folds=4)
        nuis = _fast_nuisances(data, seed=rep)
        cal = calibrate_nuisances(data, nuis)
        for arm in (0, 1):
            mask = data.arm_indicator(arm)
            y = data.outcome[mask]
            raw = nuis.mu[mask, arm]
            fit = cal.mu_star[mask, arm]
            assert np.sum((y - fit) ** 2) <= np.sum((y - raw) ** 2)
            indicator = data.arm_indicator(arm).astype(float)
            assert (
                np.sum((indicator - cal.pi_star[:, arm]) ** 2)
                <= np.sum((indicator - nuis.pi[:, arm]) ** 2)
            )
            checked += 2
    _verdict(
        "criterion 3: in-sample risk non-worsening",
        True,
        f"{checked} calibrations, all weakly risk-improving (exact comparison)",
    )


def _scenario_gate(name, result, tau_true):
    aipw = result.summary["aipw"]
    cdml = result.summary["cdml"]
    gap = cdml["coverage"] - aipw["coverage"]
    ok = (
        cdml["coverage"] >= 0.88
        and gap >= 0.05
        and abs(cdml["bias"]) <= abs(aipw["bias"])
    )
    detail = (
        f"cdml cover {cdml['coverage']:.3f} vs aipw {aipw['coverage']:.3f} "
        f"(gap {gap:+.3f}); |bias| {abs(cdml['bias']):.4f} vs {abs(aipw['bias']):.4f}"
    )
    _verdict(name, ok, detail)


def test_criterion_04_scenario_b(scenario_b):
    """Only the propensity is estimated consistently: calibrated estimator
    keeps coverage and bias while the plain one-step degrades.

    Known-red gate: the coverage-gap clause does not materialize at n=1000.
    The plain one-step estimator carries ~10x the bias of the calibrated one
    here (that clause holds with a wide margin), but its Wald se overstates
    its true sampling sd under outcome misspecification with an estimated
    propensity, which masks the bias in coverage terms at this sample size.
    The same code shows the expected gap at n=4000 (AIPW 0.87 vs calibrated
    0.93, gap +0.06). The gate is asserted as stated rather than weakened.
    """
    _scenario_gate("criterion 4: scenario (b) gates", scenario_b, scenario_b.tau_true)


def test_criterion_05_scenario_c(scenario_c):
    """Only the outcome regression is estimated consistently."""
    _scenario_gate("criterion 5: scenario (c) gates", scenario_c, scenario_c.tau_true)


def test_criterion_06_scenario_a(scenario_a):
    """Both nuisances consistent: both estimators near-nominal and unbiased."""
    ok = True
    details = []
    for est in ("aipw", "cdml"):
        cover = scenario_a.summary[est]["coverage"]
        bias = scenario_a.summary[est]["bias"]
        ok = ok and 0.90 <= cover <= 0.99 and abs(bias) < 0.02
        details.append(f"{est}: cover {cover:.3f}, bias {bias:+.4f}")
    _verdict("criterion 6: scenario (a) gates", ok, "; ".join(details))


def test_criterion_07_bootstrap_wald_agreement(scenario_a):
    """Under double consistency, sqrt(n) * bootstrap sd tracks the IF sd."""
    frame = scenario_a.replicates.head(50)
    ratio = float(
        (np.sqrt(scenario_a.config.n) * frame["cdml_sigma_boot"] / frame["cdml_if_sd"]).mean()
    )
    ok = abs(ratio - 1.0) <= 0.15
    _verdict(
        "criterion 7: bootstrap/Wald sd agreement",
        ok,
        f"mean sqrt(n)*sigma_boot / if_sd = {ratio:.3f} over 50 replicates",
    )


def _run_cli(args, threads, cwd):
    env = dict(os.environ, CDML_THREADS=str(threads))
    proc = subprocess.run(
        [sys.executable, "-m", "cdml.cli", *args],
        capture_output=True,
        env=env,
        cwd=cwd,
        check=False,
    )
    assert proc.returncode == 0, proc.stderr.decode()
    return proc.stdout


def test_criterion_08_determinism_across_thread_counts(tmp_path):
    """simulate and estimate outputs are byte-identical at 1, 4, 8 threads."""
    import pandas as pd

    rng = np.random.default_rng(808)
    n = 80
    pi1 = rng.uniform(0.3, 0.7, n)
    frame = pd.DataFrame(
        {
            "y": rng.integers(0, 2, n).astype(float),
            "a": rng.integers(0, 2, n),
            "w1": rng.normal(size=n),
            "mu_0": rng.uniform(0.2, 0.8, n),
            "mu_1": rng.uniform(0.2, 0.8, n),
            "pi_0": 1 - pi1,
            "pi_1": pi1,
        }
    )
    csv_path = tmp_path / "toy.csv"
    frame.to_csv(csv_path, index=False)

    sim_outputs = {}
    est_outputs = {}
    for threads in (1, 4, 8):
        out_dir = tmp_path / f"sim_t{threads}"
        _run_cli(
            ["simulate", "--scenario", "b", "--n", "150", "--reps", "3",
             "--boot-reps", "100", "--seed", "5", "--out", str(out_dir)],
            threads, tmp_path,
        )
        sim_outputs[threads] = {
            name: (out_dir / name).read_bytes()
            for name in ("replicates.csv", "metrics.json", "metrics_long.csv")
        }
        est_outputs[threads] = _run_cli(
            ["estimate", "--data", str(csv_path), "--outcome", "y",
             "--treatment", "a", "--covariates", "w1",
             "--mu-cols", "mu_0,mu_1", "--pi-cols", "pi_0,pi_1",
             "--folds", "2", "--ci", "bootstrap", "--boot-reps", "400",
             "--seed", "5"],
            threads, tmp_path,
        )
    ok = (
        sim_outputs[1] == sim_outputs[4] == sim_outputs[8]
        and est_outputs[1] == est_outputs[4] == est_outputs[8]
    )
    _verdict(
        "criterion 8: determinism across thread counts",
        ok,
        "simulate files and estimate stdout byte-identical at 1/4/8 threads",
    )


def test_criterion_09_riesz_propensity_agreement():
    """The generic balancing-loss path reproduces 1/pi* for treated units."""
    rng = np.random.default_rng(909)
    worst = 0.0
    checked = 0
    for _ in range(50):
        data = sample_dgp(300, rng, n_folds=5)
        w1 = data.covariates[:, 0]
        # strictly monotone, miscalibrated propensity predictions
        logits = 0.8 * (-w1) - 0.3
        pi1 = 1.0 / (1.0 + np.exp(-logits)) + np.arange(data.n) * 1e-12
        pi1 = np.clip(pi1, 1e-6, 1 - 1e-6)
        nuis = validate_nuisances(
            data,
            np.full((data.n, 2), 0.5),
            np.column_stack([1.0 - pi1, pi1]),
            source="external",
        )
        for arm in (0, 1):
            mask = data.arm_indicator(arm)
            if not mask.any():
                continue
            _, pi_star, _ = calibrate_propensity(data, nuis, arm)
            pi_col = nuis.pi[:, arm]
            alpha_obs = np.where(mask, 1.0 / pi_col, 0.0)
            alpha_eval = 1.0 / pi_col
            riesz = calibrate_riesz_generic(alpha_obs, alpha_eval).predict(alpha_eval)
            diff = np.abs(riesz[mask] - 1.0 / pi_star[mask]).max()
            worst = max(worst, float(diff))
            checked += 1
    _verdict(
        "criterion 9: balancing-loss / propensity-calibration agreement",
        worst < 1e-6,
        f"max treated-weight discrepancy {worst:.2e} over {checked} arm calibrations "
        f"(pre-truncation)",
    )


def test_criterion_10_partial_covariance_bias():
    """Linear-Gaussian design: calibrated partial covariance bias within 3 MC SEs.

    Design note: in-sample binned calibration of both regressions shrinks the
    cross-moment by about tau * (bins_m + bins_e) / n (each bin absorbs its
    own observation). The effect vanishes at the n^(-2/3) rate; the moderate
    effect size and noise here keep it well inside Monte Carlo noise at
    n = 2000.
    """
    theta, sigma_x, sigma_y = 0.2, 1.0, 2.0
    truth = theta * sigma_x**2
    n, reps, d = 2000, 300, 2
    b = np.array([1.0, -0.5])
    c = np.array([0.5, 1.0])
    estimates = np.empty(reps)
    for rep in range(reps):
        rng = np.random.default_rng(10_000 + rep)
        W = rng.normal(size=(n, d))
        X = W @ b + rng.normal(scale=sigma_x, size=n)
        Y = theta * X + W @ c + rng.normal(scale=sigma_y, size=n)
        design = np.column_stack([np.ones(n), W])
        fold = np.arange(n) % 5
        m_hat = np.empty(n)
        e_hat = np.empty(n)
        for j in range(5):
            train = fold != j
            cm, *_ = np.linalg.lstsq(design[train], Y[train], rcond=None)
            ce, *_ = np.linalg.lstsq(design[train], X[train], rcond=None)
            m_hat[fold == j] = design[fold == j] @ cm
            e_hat[fold == j] = design[fold == j] @ ce
        estimates[rep], _ = partial_covariance_cdml(X, Y, m_hat, e_hat)
    bias = estimates.mean() - truth
    mc_se = estimates.std(ddof=1) / np.sqrt(reps)
    ok = abs(bias) <= 3 * mc_se
    _verdict(
        "criterion 10: partial covariance bias",
        ok,
        f"bias {bias:+.5f} vs 3*MC-SE {3 * mc_se:.5f} (truth {truth}, {reps} reps)",
    )
