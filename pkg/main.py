#!/usr/bin/env python3
"""
exactmeta - Monte Carlo conditional likelihood-ratio confidence intervals for
random-effects meta-analysis.

Subcommands:
    uni       univariate meta-analysis (y,variance CSV)
    dta       bivariate diagnostic test accuracy (tp,fp,fn,tn or yA,yB,vA,vB CSV)
    nma       contrast-based network meta-analysis (arm- or contrast-level CSV)
    simulate  coverage experiments (table1, table2, table3 presets)

This script can be used as a command-line tool or imported as a module.
"""

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from exactmeta import config, ingest
from exactmeta.errors import ExactMetaError, InputError

logger = logging.getLogger("exactmeta.cli")

UNI_METHODS = ["mc", "dl", "reml", "knha", "lr"]
DTA_METHODS = ["mc", "acr"]
NMA_METHODS = ["mc", "reml", "lr"]
CONTINUITY_CORRECTION = 0.5


def _methods(requested: str, allowed: List[str]) -> List[str]:
    return list(allowed) if requested == "all" else [requested]


def _floats(text: str, name: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError as e:
        raise InputError(f"{name} must be comma-separated numbers, got {text!r}") from e


def _mc_entry(interval, p_null, args, parameter: str, tau2: float) -> Dict[str, Any]:
    entry = {
        "method": "mc",
        "parameter": parameter,
        "estimate": interval.point_estimate,
        "lower": interval.lower,
        "upper": interval.upper,
        "tau2": tau2,
        "converged": interval.converged,
        "lower_p": interval.lower_p,
        "upper_p": interval.upper_p,
        "ess": interval.ess,
        "mc_se": interval.mc_se,
        "n_degenerate": interval.n_degenerate,
        "alpha": args.alpha,
        "B": args.B,
        "seed": args.seed,
    }
    if p_null is not None:
        entry.update(null=args.null, p_value_at_null=p_null.p, p_value_ess=p_null.ess,
                     p_value_mc_se=p_null.mc_se, p_value_n_degenerate=p_null.n_degenerate)
    return entry


def run_uni(args) -> Dict[str, Any]:
    """Intervals for mu (or tau2) of the univariate model."""
    from exactmeta import comparators, univariate  # Import here to keep --help fast

    data = ingest.read_univariate(args.input)
    methods = _methods(args.method, UNI_METHODS)
    if args.parameter == "tau2" and methods != ["mc"]:
        if args.method != "all":
            raise InputError("Only the mc method gives intervals for tau2")
        methods = ["mc"]

    results = []
    for method in methods:
        if method == "mc":
            if args.parameter == "tau2":
                interval = univariate.ci_tau2(data, args.alpha, args.B, args.seed)
                p_null = (univariate.p_value_tau2(data, args.null, args.B, args.seed)
                          if args.null is not None else None)
                results.append(_mc_entry(interval, p_null, args, "tau2", interval.point_estimate))
            else:
                fit = univariate.fit_ml(data)
                interval = univariate.ci_mu(data, args.alpha, args.B, args.seed)
                p_null = (univariate.p_value_mu(data, args.null, args.B, args.seed)
                          if args.null is not None else None)
                results.append(_mc_entry(interval, p_null, args, "mu", fit.tau2))
        else:
            interval_fn = {
                "dl": comparators.dl_interval,
                "reml": comparators.reml_interval_uni,
                "knha": comparators.knha_interval,
                "lr": comparators.lr_interval_uni,
            }[method]
            entry = interval_fn(data, args.alpha).to_dict()
            entry.update(method=method, parameter="mu", alpha=args.alpha)
            entry.pop("coordinate")
            results.append(entry)

    meta = {"k": data.k, "input": args.input, "continuity_correction": CONTINUITY_CORRECTION}
    return results[0] | {"meta": meta} if len(results) == 1 else {"results": results, "meta": meta}


def run_dta(args) -> Dict[str, Any]:
    """Bivariate fit, p-value at a null pair, and MC or approximate region."""
    from exactmeta import bivariate  # Import here to keep --help fast

    data = ingest.read_dta(args.input)
    methods = _methods(args.method, DTA_METHODS)
    mu0 = None
    if args.null is not None:
        mu0 = _floats(args.null, "--null")
        if mu0.size != 2:
            raise InputError("--null for dta takes two values: muA,muB")
    fit = bivariate.fit_ml_bivar(data)
    if not fit.converged:
        logger.warning("Bivariate ML fit did not fully converge")

    params = fit.params
    result = {
        "estimate": [params.muA, params.muB],
        "sigmaA2": params.sigmaA2,
        "sigmaB2": params.sigmaB2,
        "rho": params.rho,
        "deviance": fit.deviance,
        "boundary": fit.boundary,
        "alpha": args.alpha,
        "B": args.B,
        "seed": args.seed,
        "meta": {"k": data.k, "input": args.input, "continuity_correction": CONTINUITY_CORRECTION},
    }
    if mu0 is not None:
        p = bivariate.p_value_bivar(data, mu0, args.B, args.seed)
        result.update(null=mu0.tolist(), p_value_at_null=p.p, ess=p.ess, mc_se=p.mc_se,
                      n_degenerate=p.n_degenerate)

    regions = {}
    if args.region:
        for method in methods:
            if method == "mc":
                regions["mc"] = bivariate.confidence_region(data, args.alpha, args.M, args.B, args.seed)
            else:
                regions["acr"] = bivariate.approx_region(data, args.alpha, args.M)
        result["regions"] = {name: region.to_dict() for name, region in regions.items()}

    try:
        grid = np.linspace(data.y[:, 1].min(), data.y[:, 1].max(), 50)
        roc = bivariate.sroc_points(fit, grid)
        result["sroc"] = [{"muB": float(g), "sens": float(s), "fpr": float(f)}
                          for g, (s, f) in zip(grid, roc)]
    except InputError as e:
        logger.warning(f"SROC points skipped: {e}")
        result["sroc"] = None

    summary = bivariate.transform_to_roc(fit.mu)[0]
    result["summary_point"] = {"sens": float(summary[0]), "fpr": float(summary[1])}
    result["_regions"] = regions
    return result


def _nma_row(label: str, method: str, interval, exp: bool) -> Dict[str, Any]:
    estimate = getattr(interval, "estimate", None)
    if estimate is None:
        estimate = interval.point_estimate
    row = {"treatment": label, "method": method, "estimate": estimate,
           "lower": interval.lower, "upper": interval.upper}
    for key in ("ess", "mc_se", "n_degenerate"):
        if hasattr(interval, key):
            row[key] = getattr(interval, key)
    if exp:
        row.update(exp_estimate=float(np.exp(estimate)), exp_lower=float(np.exp(interval.lower)),
                   exp_upper=float(np.exp(interval.upper)))
    return row


def run_nma(args) -> Dict[str, Any]:
    """Per-treatment table, or intervals for one contrast c'beta."""
    from exactmeta import comparators, network  # Import here to keep --help fast

    model = ingest.read_network(args.input, augment=args.augment, reference=args.reference)
    methods = _methods(args.method, NMA_METHODS)
    ml = network.fit_ml_net(model)
    reml = network.fit_reml_net(model)
    result = {
        "reference": model.labels[0],
        "treatments": model.labels[1:],
        "tau_ml": float(np.sqrt(ml.tau2)),
        "tau_reml": float(np.sqrt(reml.tau2)),
        "beta_ml": ml.beta.tolist(),
        "beta_reml": reml.beta.tolist(),
        "alpha": args.alpha,
        "B": args.B,
        "seed": args.seed,
        "meta": {"k": model.k, "N": model.N, "input": args.input, "augment": args.augment},
    }

    if args.contrast:
        contrasts = [("contrast", _floats(args.contrast, "--contrast"))]
        if contrasts[0][1].size != model.p:
            raise InputError(f"--contrast needs {model.p} values, got {contrasts[0][1].size}")
        result["contrast"] = contrasts[0][1].tolist()
    else:
        if args.null is not None:
            raise InputError("--null requires --contrast")
        contrasts = [(label, network.basis_contrast(model.p, j + 1))
                     for j, label in enumerate(model.labels[1:])]

    rows = []
    for label, c in contrasts:
        for method in methods:
            if method == "mc":
                interval = network.ci_contrast(model, c, args.alpha, args.B, args.seed)
            elif method == "reml":
                interval = comparators.reml_wald_contrast(model, c, args.alpha)
            else:
                interval = comparators.lr_interval_net(model, c, args.alpha)
            rows.append(_nma_row(label, method, interval, args.exp))
    result["rows"] = rows

    if args.null is not None:
        p = network.p_value_contrast(model, contrasts[0][1], args.null, args.B, args.seed)
        result.update(null=args.null, p_value_at_null=p.p, ess=p.ess, mc_se=p.mc_se,
                      n_degenerate=p.n_degenerate)
    return result


def run_simulate(args) -> Dict[str, Any]:
    """Coverage experiment for one cell or a whole preset grid."""
    from exactmeta import simulate  # Import here to keep --help fast

    methods = None if args.method == "all" else [args.method]
    reports = simulate.run_experiment(args.experiment, cell=args.cell, R=args.R, B=args.B,
                                      seed=args.seed, alpha=args.alpha, methods=methods,
                                      backend=args.backend)
    return {"reports": [r.to_dict() for r in reports], "_frames": [r.to_frame() for r in reports]}


def render(command: str, result: Dict[str, Any], fmt: str) -> str:
    """Serialize a result as JSON or CSV text."""
    frames = result.pop("_frames", None)
    regions = result.pop("_regions", None)
    if fmt == "json":
        return ingest.dumps(result)
    if command == "simulate":
        return ingest.frame_to_csv(pd.concat(frames, ignore_index=True))
    if command == "dta":
        if regions:
            parts = []
            for name, region in regions.items():
                df = ingest.region_frame(region)
                df.insert(0, "method", name)
                parts.append(df)
            return ingest.frame_to_csv(pd.concat(parts, ignore_index=True))
        flat = {k: v for k, v in result.items() if not isinstance(v, (dict, list)) or k == "estimate"}
        flat["muA"], flat["muB"] = flat.pop("estimate")
        return ingest.frame_to_csv(pd.DataFrame([flat]))
    if command == "nma":
        return ingest.frame_to_csv(pd.DataFrame(result["rows"]))
    rows = result.get("results", [result])
    return ingest.frame_to_csv(pd.DataFrame([{k: v for k, v in r.items() if k != "meta"} for r in rows]))


def _add_common(parser: argparse.ArgumentParser, methods: List[str], default_method: str):
    parser.add_argument("--alpha", type=float, default=config.DEFAULT_ALPHA,
                        help="1 - confidence level (default: 0.05)")
    parser.add_argument("--B", type=int, default=config.DEFAULT_B,
                        help="Monte Carlo replicates per p-value (default: 1000)")
    parser.add_argument("--seed", type=int, default=0, help="Master random seed (default: 0)")
    parser.add_argument("--method", default=default_method, choices=methods + ["all"],
                        help=f"Method (default: {default_method})")
    parser.add_argument("--out", help="Output file (default: stdout)")
    parser.add_argument("--format", default="json", choices=["json", "csv"],
                        help="Output format (default: json)")


def parse_arguments(argv: Optional[List[str]] = None):
    """Parse command line arguments."""
    parser = argparse.ArgumentParser(
        description="Monte Carlo conditional LRT confidence intervals for random-effects meta-analysis."
    )
    parser.add_argument("--log-level", default=None,
                        help="Logging level (default: EXACTMETA_LOG_LEVEL or WARNING)")
    subparsers = parser.add_subparsers(dest="command", required=True)

    uni = subparsers.add_parser("uni", help="Univariate meta-analysis")
    uni.add_argument("--input", required=True, help="CSV with y,variance columns")
    _add_common(uni, UNI_METHODS, "mc")
    uni.add_argument("--parameter", default="mu", choices=["mu", "tau2"],
                     help="Parameter of interest (default: mu)")
    uni.add_argument("--null", type=float, help="Also report the MC p-value at this null value")

    dta = subparsers.add_parser("dta", help="Bivariate diagnostic test accuracy meta-analysis")
    dta.add_argument("--input", required=True, help="CSV with tp,fp,fn,tn or yA,yB,vA,vB columns")
    _add_common(dta, DTA_METHODS, "mc")
    dta.add_argument("--region", action="store_true", help="Build the confidence region")
    dta.add_argument("--M", type=int, default=config.DEFAULT_REGION_POINTS,
                     help="Number of region angles (default: 200)")
    dta.add_argument("--null", help="Also report the MC p-value at muA,muB")

    nma = subparsers.add_parser("nma", help="Contrast-based network meta-analysis")
    nma.add_argument("--input", required=True, help="Arm-level or contrast-level CSV")
    _add_common(nma, NMA_METHODS, "mc")
    nma.add_argument("--contrast", help="Comma-separated c1,...,cp for c'beta")
    nma.add_argument("--augment", action="store_true",
                     help="Add a reference pseudo-arm to studies without the reference")
    nma.add_argument("--reference", help="Reference treatment label")
    nma.add_argument("--null", type=float, help="Also report the MC p-value of c'beta at this value")
    nma.add_argument("--exp", action="store_true", help="Add exponentiated (odds ratio) columns")

    sim = subparsers.add_parser("simulate", help="Coverage experiments")
    sim.add_argument("--experiment", required=True, choices=["table1", "table2", "table3"],
                     help="Experiment preset")
    sim.add_argument("--cell", help="One grid cell, e.g. k=3,tau2=0.10 (default: whole grid)")
    sim.add_argument("--R", type=int, help="Replications per cell (default: preset)")
    sim.add_argument("--backend", default="local", choices=["local", "celery"],
                     help="Run replications on threads or Celery workers (default: local)")
    _add_common(sim, sorted(set(UNI_METHODS + DTA_METHODS + NMA_METHODS)), "all")
    sim.set_defaults(B=None)

    return parser.parse_args(argv)


def main():
    """
    Main entry point for the script.

    Returns:
        int: Exit code (0 success, 2 input error, 3 numerical failure)
    """
    args = parse_arguments()
    config.setup_logging(args.log_level)

    runners = {"uni": run_uni, "dta": run_dta, "nma": run_nma, "simulate": run_simulate}
    try:
        result = runners[args.command](args)
        ingest.write_output(render(args.command, result, args.format), args.out)
    except ExactMetaError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except Exception as e:
        logger.exception(f"Unexpected error: {e}")
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
