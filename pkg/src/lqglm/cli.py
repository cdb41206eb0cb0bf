"""Command-line interface.

Subcommands: ``fit``, ``test``, ``residuals``, ``envelope``, ``selectq``,
``simulate``.  Input data is RFC-4180 CSV with a header row; numeric
non-response columns become covariates in file order, with an intercept
prepended unless ``--no-intercept``.  JSON documents carry ``"schema":
"lq-glm/1"``.  Exit codes: 0 success, 1 input error, 2 fit did not
converge (the result document is still emitted).  ``LQGLM_SEED`` provides
the default seed.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from .diagnostics import (
    LinearHypothesis,
    aic_q,
    bf_test,
    deviance_residuals,
    quantile_residuals,
    score_test,
    simulation_envelope,
    standardized_residuals,
    wald_test,
)
from .errors import LqglmError, UsageError
from .fit import FitControl, fit_mlq
from .model import PROFILE, ModelData
from .numerics import rng_stream
from .qselect import QGrid, select_q_efficiency, select_q_stability
from .simulate import SimDesign, run_study

SCHEMA = "lq-glm/1"


def _default_seed():
    return int(os.environ.get("LQGLM_SEED", "0"))


def _fmt(x):
    return repr(float(x))


def load_table(path, response, log_cols=(), no_intercept=False):
    """CSV -> (X, y, covariate names). Numeric non-response columns only."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise UsageError("no rows") from None
        rows = [r for r in reader if r]
    if not rows:
        raise UsageError("no rows")
    if response not in header:
        raise UsageError(f"response column {response!r} not in header {header}")
    cols = {name: [] for name in header}
    for r in rows:
        if len(r) != len(header):
            raise UsageError("ragged CSV row")
        for name, val in zip(header, r):
            cols[name].append(val)
    numeric = {}
    for name, vals in cols.items():
        try:
            numeric[name] = np.array([float(v) for v in vals])
        except ValueError:
            if name == response:
                raise UsageError(f"response column {response!r} is not numeric") from None
    y = numeric.pop(response)
    names = [n for n in header if n in numeric]
    for c in log_cols:
        if c not in numeric:
            raise UsageError(f"--log column {c!r} not a numeric covariate")
        if np.any(numeric[c] <= 0):
            raise UsageError(f"--log column {c!r} has non-positive values")
        numeric[c] = np.log(numeric[c])
    columns = [numeric[n] for n in names]
    if not no_intercept:
        columns = [np.ones(len(y))] + columns
        names = ["(intercept)"] + names
    if not columns:
        raise UsageError("no covariate columns")
    return np.column_stack(columns), y, names


def _emit(text, output):
    if output in (None, "-"):
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(output, "w") as fh:
            fh.write(text)


def _model_data(args):
    log_cols = [c for c in (args.log.split(",") if args.log else []) if c]
    X, y, names = load_table(args.data, args.response, log_cols, args.no_intercept)
    phi = PROFILE if args.phi == "profile" else float(args.phi)
    return ModelData(X, y, args.family, phi=phi), names


def _resolve_q(args, data):
    if args.q == "auto":
        lo, step = _parse_grid(args.grid)
        sel = select_q_stability(data, QGrid(q_min=lo, step=step))
        return sel.q_opt, sel
    q = float(args.q)
    return q, None


def _parse_grid(text):
    lo, step = text.split(":")
    return float(lo), float(step)


def _control(args, q):
    return FitControl(q=q, max_iter=args.max_iter, tol=args.tol)


def cmd_fit(args):
    data, names = _model_data(args)
    q, _ = _resolve_q(args, data)
    fit = fit_mlq(data, _control(args, q))
    doc = {
        "schema": SCHEMA,
        "family": data.family.name,
        "n": data.n,
        "p": data.p,
        "covariates": names,
        "q_used": q,
        "beta_q": None if fit.beta_q is None else fit.beta_q.tolist(),
        "beta_star": fit.beta_star.tolist(),
        "se": fit.se.tolist(),
        "weights": fit.weights.tolist(),
        "lq_value": fit.lq_value,
        "aic_q": aic_q(data, fit),
        "phi_hat": fit.phi_hat,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "message": fit.message,
    }
    _emit(json.dumps(doc, indent=2), args.output)
    return 0 if fit.converged else 2


def cmd_selectq(args):
    data, _ = _model_data(args)
    lo, step = _parse_grid(args.grid)
    grid = QGrid(q_min=lo, step=step, rho_factor=args.rho_factor)
    if args.method == "stability":
        sel = select_q_stability(data, grid)
    else:
        sel = select_q_efficiency(data, grid)
    doc = {
        "schema": SCHEMA,
        "method": sel.method,
        "q_opt": sel.q_opt,
        "rho": sel.rho,
        "qv_profile": {f"{k:.6g}": v for k, v in sel.qv_profile.items()},
        "dropped": sel.dropped,
        "pruned": sel.pruned,
        "fits": {f"{k:.6g}": v for k, v in sel.fits.items()},
    }
    _emit(json.dumps(doc, indent=2), args.output)
    return 0


def cmd_test(args):
    data, _ = _model_data(args)
    q, _ = _resolve_q(args, data)
    H = np.loadtxt(args.H, delimiter=",", ndmin=2)
    h = np.loadtxt(args.h_vector, delimiter=",", ndmin=1)
    hyp = LinearHypothesis(H, h)
    results = []
    kinds = ["wald", "score", "bf"] if args.stat == "all" else [args.stat]
    fit = fit_mlq(data, _control(args, q))
    for kind in kinds:
        if kind == "wald":
            r = wald_test(fit, hyp)
        elif kind == "score":
            r = score_test(data, hyp, q, _control(args, q))
        else:
            r = bf_test(data, fit, hyp, q, _control(args, q))
        results.append(
            {"kind": r.kind, "statistic": r.statistic, "dof": r.dof, "p_value": r.p_value}
        )
    doc = {"schema": SCHEMA, "q_used": q, "tests": results}
    _emit(json.dumps(doc, indent=2), args.output)
    return 0


def _residual_values(kind, data, fit, seed):
    if kind == "standardized":
        return standardized_residuals(data, fit)
    if kind == "deviance":
        return deviance_residuals(data, fit)
    return quantile_residuals(data, fit, rng_stream(seed, 0))


def cmd_residuals(args):
    data, _ = _model_data(args)
    q, _ = _resolve_q(args, data)
    fit = fit_mlq(data, _control(args, q))
    vals = _residual_values(args.type, data, fit, args.seed)
    if args.format == "json":
        doc = {"schema": SCHEMA, "q_used": q, "type": args.type,
               "residuals": vals.tolist()}
        _emit(json.dumps(doc, indent=2), args.output)
    else:
        lines = ["index,residual"]
        lines += [f"{i + 1},{_fmt(v)}" for i, v in enumerate(vals)]
        _emit("\n".join(lines) + "\n", args.output)
    return 0


def cmd_envelope(args):
    data, _ = _model_data(args)
    q, _ = _resolve_q(args, data)
    fit = fit_mlq(data, _control(args, q))
    env = simulation_envelope(data, fit, kind=args.type, reps=args.reps,
                              seed=args.seed, level=args.level,
                              control=_control(args, q))
    if args.format == "json":
        doc = {"schema": SCHEMA, "q_used": q, "type": env.kind, "reps": env.reps,
               "failed": env.failed,
               "normal_quantiles": env.normal_quantiles.tolist(),
               "observed": env.observed.tolist(),
               "lower": env.lower.tolist(), "upper": env.upper.tolist()}
        _emit(json.dumps(doc, indent=2), args.output)
    else:
        lines = ["position,normal_quantile,observed,lower,upper"]
        for i in range(len(env.observed)):
            lines.append(
                f"{i + 1},{_fmt(env.normal_quantiles[i])},{_fmt(env.observed[i])},"
                f"{_fmt(env.lower[i])},{_fmt(env.upper[i])}"
            )
        _emit("\n".join(lines) + "\n", args.output)
    return 0


def cmd_simulate(args):
    design = SimDesign(
        n=args.n, eps=args.eps, nu=args.nu, reps=args.reps,
        q_list=tuple(float(v) for v in args.q_list.split(",")),
        seed=args.seed, fixed_x=args.fixed_x,
        include_intercept=args.intercept,
    )
    report = run_study(design, jobs=args.jobs)
    _emit(report.to_json() if args.format == "json" else report.to_csv(), args.output)
    return 0


def _add_data_options(p, with_q=True):
    p.add_argument("--data", required=True, help="input CSV (header required)")
    p.add_argument("--response", required=True, help="response column name")
    p.add_argument("--family", default="bernoulli",
                   help="bernoulli, poisson, or gaussian")
    p.add_argument("--phi", default="1.0",
                   help="dispersion (number, or 'profile' for gaussian)")
    p.add_argument("--log", default="", help="comma-separated columns to log")
    p.add_argument("--no-intercept", action="store_true")
    if with_q:
        p.add_argument("--q", default="1.0", help="distortion parameter or 'auto'")
    p.add_argument("--grid", default="0.70:0.01", help="selectq grid lo:step")
    p.add_argument("--max-iter", type=int, default=25)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--output", default="-", help="output path ('-' = stdout)")
    p.add_argument("--format", default="json", choices=["json", "csv"])


def build_parser():
    ap = argparse.ArgumentParser(prog="lqglm",
                                 description="Robust GLM fitting by maximum Lq-likelihood")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a model")
    _add_data_options(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("selectq", help="select the distortion parameter")
    _add_data_options(p, with_q=False)
    p.add_argument("--method", default="stability", choices=["stability", "efficiency"])
    p.add_argument("--rho-factor", type=float, default=0.05)
    p.set_defaults(func=cmd_selectq)

    p = sub.add_parser("test", help="test a linear hypothesis H beta = h")
    _add_data_options(p)
    p.add_argument("--H", required=True, help="CSV file with the d x p matrix H")
    p.add_argument("--h", dest="h_vector", required=True, help="CSV file with the d-vector h")
    p.add_argument("--stat", default="all", choices=["wald", "score", "bf", "all"])
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("residuals", help="per-observation residuals")
    _add_data_options(p)
    p.add_argument("--type", default="standardized",
                   choices=["standardized", "deviance", "quantile"])
    p.set_defaults(func=cmd_residuals)

    p = sub.add_parser("envelope", help="parametric-bootstrap QQ envelope")
    _add_data_options(p)
    p.add_argument("--type", default="standardized",
                   choices=["standardized", "deviance", "quantile"])
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--level", type=float, default=0.95)
    p.set_defaults(func=cmd_envelope)

    p = sub.add_parser("simulate", help="contamination Monte Carlo study")
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--nu", type=float, default=5.0)
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--q-list", default="1.0,0.97")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--fixed-x", action="store_true",
                   help="share one design matrix across replicates")
    p.add_argument("--intercept", action="store_true",
                   help="prepend an intercept to the simulation design")
    p.add_argument("--output", default="-")
    p.add_argument("--format", default="csv", choices=["json", "csv"])
    p.set_defaults(func=cmd_simulate)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (LqglmError, OSError, ValueError) as e:
        print(f"lqglm: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
