"""Command-line interface: estimate on user data, run the simulation harness,
or calibrate a prediction column standalone.

stdout carries only the machine-readable JSON report; all human-readable
logging (including the fully resolved configuration) goes to stderr. Exit
codes: 0 success, 2 flag/schema/validation error, 3 estimation error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from ._util import resolve_workers
from .bootstrap import bootstrap_ci
from .calibration import calibrate_nuisances, calibrate_riesz_generic
from .crossfit import LearnerSpec, crossfit_nuisances
from .data import (
    Schema,
    assign_folds,
    external_nuisance_matrix,
    load_csv,
    validate_dataset,
    with_folds,
)
from .errors import CdmlError, FoldError, SchemaError
from .estimators import (
    WALD_CDML_CAVEAT,
    EstimateReport,
    _clipped_pi,
    aipw_estimate,
    ate_aipw,
    ate_cdml,
    counterfactual_mean_cdml,
    wald_ci,
)
from .isotonic import fit_ls_isotonic
from .simulation import ScenarioConfig, run_experiment

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_ESTIMATION = 3


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _log_config(name: str, resolved: dict) -> None:
    _log(f"cdml {__version__} {name} config: {json.dumps(resolved, sort_keys=True)}")


def _parse_arms(text: str) -> tuple[int, ...]:
    parts = [p for p in text.split(",") if p.strip() != ""]
    arms = tuple(int(p) for p in parts)
    if len(arms) not in (1, 2):
        raise ValueError("--arms takes one arm or a pair 'a1,a0'")
    return arms


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cdml")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate a counterfactual mean or contrast from a CSV")
    est.add_argument("--data", required=True, help="CSV path with a header row")
    est.add_argument("--outcome", required=True)
    est.add_argument("--treatment", required=True)
    est.add_argument("--covariates", required=True, help="comma-separated covariate columns")
    est.add_argument("--estimator", default="cdml", choices=["cdml", "aipw", "ipw", "plugin"])
    est.add_argument("--arms", default="1,0", type=_parse_arms,
                     help="arm pair 'a1,a0' for a contrast or one arm for a counterfactual mean")
    est.add_argument("--folds", type=int, default=5)
    est.add_argument("--fold-col", default=None, help="existing fold column (skips assignment)")
    est.add_argument("--ci", default="bootstrap",
                     choices=["bootstrap", "bootstrap-normal", "bootstrap-percentile", "wald"])
    est.add_argument("--boot-reps", type=int, default=10000)
    est.add_argument("--level", type=float, default=0.95)
    est.add_argument("--seed", type=int, default=0)
    est.add_argument("--mu-cols", default=None, help="external outcome-regression columns")
    est.add_argument("--pi-cols", default=None, help="external propensity columns")
    est.add_argument("--outcome-learner", default="kernel_stratified",
                     choices=["kernel_stratified", "logistic_main_terms"])
    est.add_argument("--propensity-learner", default="kernel_stratified",
                     choices=["kernel_stratified", "logistic_main_terms"])
    est.add_argument("--no-cn-truncation", action="store_true",
                     help="disable c_n propensity clipping for ipw/aipw")
    est.add_argument("--dump-replicates", default=None, help="CSV path for bootstrap replicates")

    sim = sub.add_parser("simulate", help="run the Monte Carlo harness")
    sim.add_argument("--scenario", required=True, choices=["a", "b", "c"])
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--reps", type=int, default=500)
    sim.add_argument("--folds", type=int, default=5)
    sim.add_argument("--boot-reps", type=int, default=1000)
    sim.add_argument("--level", type=float, default=0.95)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True, help="output directory")

    cal = sub.add_parser("calibrate", help="calibrate a prediction column standalone")
    cal.add_argument("--data", required=True)
    cal.add_argument("--pred", required=True, help="prediction column to calibrate")
    cal.add_argument("--target", required=True,
                     help="regression target (ls) or intervened-arm weight column (riesz)")
    cal.add_argument("--loss", default="ls", choices=["ls", "riesz"])
    cal.add_argument("--bounds", default=None, help="riesz clamp interval 'lo,hi'")
    cal.add_argument("--out", required=True, help="output CSV path")
    return parser


def _cmd_estimate(args) -> int:
    frame = load_csv(args.data)
    covariates = [c for c in args.covariates.split(",") if c]
    schema = Schema(
        outcome=args.outcome,
        treatment=args.treatment,
        covariates=covariates,
        fold=args.fold_col,
        n_folds=args.folds if args.fold_col else None,
    )
    data = validate_dataset(frame, schema)
    external = args.mu_cols is not None or args.pi_cols is not None
    if args.fold_col is None:
        rng = np.random.default_rng(np.random.SeedSequence([args.seed, 1]))
        data = with_folds(data, assign_folds(data.n, args.folds, rng))

    arms = args.arms
    for arm in arms:
        if arm not in data.arms:
            raise SchemaError(f"arm {arm} not in declared arm set {data.arms}")
    codes = tuple(data.arms.index(a) for a in arms)

    ci_method = {"bootstrap": "bootstrap_normal", "bootstrap-normal": "bootstrap_normal",
                 "bootstrap-percentile": "bootstrap_percentile", "wald": "wald"}[args.ci]
    resolved = {
        "command": "estimate", "data": args.data, "outcome": args.outcome,
        "treatment": args.treatment, "covariates": covariates, "estimator": args.estimator,
        "arms": list(arms), "folds": args.folds, "fold_col": args.fold_col,
        "ci": ci_method, "boot_reps": args.boot_reps, "level": args.level,
        "seed": args.seed, "external_nuisances": external,
        "cn_truncation": not args.no_cn_truncation,
        "threads": resolve_workers(None),
    }
    _log_config("estimate", resolved)

    if external:
        mu_cols = args.mu_cols.split(",") if args.mu_cols else None
        pi_cols = args.pi_cols.split(",") if args.pi_cols else None
        nuis = external_nuisance_matrix(data, frame, mu_cols, pi_cols)
    else:
        spec = LearnerSpec(
            outcome_model=args.outcome_learner, propensity_model=args.propensity_learner
        )
        nuis = crossfit_nuisances(data, spec, seed=np.random.SeedSequence([args.seed, 2]))

    diagnostics: dict = {
        "arms": list(arms),
        "nuisance_source": nuis.source,
        "n_folds": data.n_folds,
    }
    apply_cn = not args.no_cn_truncation
    contrast = len(codes) == 2

    if args.estimator == "cdml":
        calibrated = calibrate_nuisances(data, nuis, arms=codes)
        for code, arm in zip(codes, arms):
            diagnostics[f"truncation_arm_{arm}"] = float(calibrated.trunc[code])
            diagnostics[f"outcome_levels_arm_{arm}"] = calibrated.outcome_calibrators[
                code
            ].n_distinct_levels
            diagnostics[f"propensity_levels_arm_{arm}"] = calibrated.propensity_calibrators[
                code
            ].n_distinct_levels
        if contrast:
            tau, eif = ate_cdml(data, calibrated, codes[0], codes[1])
        else:
            tau, eif = counterfactual_mean_cdml(data, calibrated, codes[0])
        if ci_method == "wald":
            diagnostics["wald_validity"] = WALD_CDML_CAVEAT
            se, lo, hi = wald_ci(tau, eif, args.level)
        else:
            boot = bootstrap_ci(
                data,
                nuis,
                arms=codes if contrast else codes[0],
                n_replicates=args.boot_reps,
                level=args.level,
                seed=np.random.SeedSequence([args.seed, 3]),
                n_workers=resolve_workers(None),
                dump_path=args.dump_replicates,
            )
            diagnostics["bootstrap_dropped"] = boot.dropped
            diagnostics["bootstrap_sigma"] = boot.sigma_hat
            se = boot.sigma_hat
            lo, hi = boot.normal_ci if ci_method == "bootstrap_normal" else boot.percentile_ci
    else:
        if ci_method != "wald":
            raise SchemaError(
                "bootstrap intervals refit isotonic calibrators and apply only to "
                "--estimator cdml; use --ci wald"
            )
        if args.estimator == "aipw":
            if contrast:
                tau, eif = ate_aipw(data, nuis, codes[0], codes[1], apply_cn)
            else:
                tau, eif = aipw_estimate(data, nuis, codes[0], apply_cn)
        elif args.estimator == "ipw":
            values = []
            for code in codes:
                pi = _clipped_pi(data, nuis, code, apply_cn)
                values.append(data.arm_indicator(code) * data.outcome / pi)
            vals = values[0] - values[1] if contrast else values[0]
            tau = float(vals.mean())
            eif = vals - tau
            diagnostics["wald_validity"] = "se treats the estimated propensities as fixed"
        else:  # plugin
            cols = [nuis.mu[:, code] for code in codes]
            vals = cols[0] - cols[1] if contrast else cols[0]
            tau = float(vals.mean())
            eif = vals - tau
            diagnostics["wald_validity"] = "se treats the outcome regression as fixed"
        se, lo, hi = wald_ci(tau, eif, args.level)

    report = EstimateReport(
        tau_hat=tau,
        se=se,
        ci_lower=lo,
        ci_upper=hi,
        level=args.level,
        estimator=args.estimator,
        ci_method=ci_method,
        n_used=data.n,
        diagnostics=diagnostics,
    )
    print(report.to_json())
    return EXIT_OK


def _cmd_simulate(args) -> int:
    cfg = ScenarioConfig(
        scenario=args.scenario,
        n=args.n,
        reps=args.reps,
        n_folds=args.folds,
        boot_reps=args.boot_reps,
        seed=args.seed,
        level=args.level,
    )
    workers = resolve_workers(None)
    resolved = dict(cfg.to_dict(), command="simulate", out=args.out, threads=workers)
    _log_config("simulate", resolved)
    os.makedirs(args.out, exist_ok=True)
    result = run_experiment(cfg, n_workers=workers)
    result.write_replicates_csv(os.path.join(args.out, "replicates.csv"))
    result.write_metrics_json(os.path.join(args.out, "metrics.json"))
    result.write_long_csv(os.path.join(args.out, "metrics_long.csv"))
    _log(result.summary_table())
    with open(os.path.join(args.out, "metrics.json")) as handle:
        sys.stdout.write(handle.read())
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    frame = load_csv(args.data)
    for col in (args.pred, args.target):
        if col not in frame.columns:
            raise SchemaError(f"missing column {col!r}")
    pred = frame[args.pred].to_numpy(dtype=float)
    target = frame[args.target].to_numpy(dtype=float)
    if not (np.all(np.isfinite(pred)) and np.all(np.isfinite(target))):
        raise ValueError("prediction and target columns must be finite")
    resolved = {
        "command": "calibrate", "data": args.data, "pred": args.pred,
        "target": args.target, "loss": args.loss, "bounds": args.bounds, "out": args.out,
    }
    _log_config("calibrate", resolved)

    if args.loss == "ls":
        calibrator = fit_ls_isotonic(pred, target)
    else:
        bounds = None
        if args.bounds:
            lo, hi = (float(p) for p in args.bounds.split(","))
            bounds = (lo, hi)
        calibrator = calibrate_riesz_generic(pred, target, bounds=bounds)

    frame[f"{args.pred}_calibrated"] = calibrator.predict(pred)
    frame.to_csv(args.out, index=False)
    calibrator_path = f"{args.out}.calibrator.json"
    with open(calibrator_path, "w") as handle:
        handle.write(calibrator.to_json())
        handle.write("\n")
    print(json.dumps({"schema_version": 1, "out": args.out,
                      "calibrator_path": calibrator_path,
                      "calibrator": calibrator.to_dict()}))
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        if args.command == "estimate":
            return _cmd_estimate(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        return _cmd_calibrate(args)
    except (SchemaError, FoldError, ValueError) as exc:
        _log(f"error: {exc}")
        return EXIT_USAGE
    except CdmlError as exc:
        _log(f"error: {exc}")
        return EXIT_ESTIMATION
    except OSError as exc:
        _log(f"error: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
