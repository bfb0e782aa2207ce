"""Command line interface: ``semitreat {estimate,simulate,weights}``.

Exit status is 0 on success, 2 for invalid input or configuration and 3
when an estimator cannot produce a result.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .density import eval_density, eval_lpsi, fit_adaptive_density
from .estimators import ESTIMATOR_NAMES, estimate_with_ci
from .exceptions import BadParamsError, EstimationError, InputError, SemitreatError
from .inference import ConfidenceInterval, m_of_n_bootstrap_var, normal_ci
from .laws import Law, get_law
from .parametric import (
    get_model,
    in_sample_ate,
    level_from_log,
    population_ate,
)
from .sample import Estimate, TwoSampleView, from_arms, split_sample
from .shift import waq_weights
from .simulation import ScenarioSpec, load_scenario, run_scenario

_TRIM_MODES = {"sym": "symmetric", "asym": "asymmetric", "right": "right"}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _pair(text: str, n: int, name: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise BadParamsError(f"{name} expects {n} comma-separated numbers, got {text!r}") from None
    if len(vals) != n:
        raise BadParamsError(f"{name} expects {n} comma-separated numbers, got {text!r}")
    return vals


def read_csv(path) -> tuple[np.ndarray, np.ndarray | None]:
    """Read columns ``y`` and (optionally) ``z`` from a headed CSV file."""
    try:
        fh = sys.stdin if str(path) == "-" else open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise BadParamsError(f"cannot open {path}: {exc.strerror}") from None
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "y" not in reader.fieldnames:
            raise BadParamsError("input CSV needs a header with a 'y' column")
        has_z = "z" in reader.fieldnames
        ys, zs = [], []
        for line, row in enumerate(reader, start=2):
            try:
                ys.append(float(row["y"]))
                if has_z:
                    zs.append(float(row["z"]))
            except (TypeError, ValueError):
                raise BadParamsError(f"line {line}: non-numeric value") from None
    return np.array(ys), (np.array(zs) if has_z else None)


def _jsonable(obj):
    if isinstance(obj, dict):
        out = {}
        for k, v in obj.items():
            if isinstance(v, np.ndarray) and v.size > 64:
                continue
            if k in ("weights", "objective_curve"):
                continue
            out[str(k)] = _jsonable(v)
        return out
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if obj is None or isinstance(obj, (int, str)):
        return obj
    return str(obj)


def _emit(text: str, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


# estimate ----------------------------------------------------------------


def _options(args) -> dict:
    opts = {
        "trim_mode": _TRIM_MODES[args.trim_mode],
        "split": args.split,
        "eif_mode": args.eif_mode,
        "seed": args.seed,
        "boot_m": args.boot_m,
        "boot_B": args.boot_B,
    }
    if args.trim_range is not None:
        a0, a1 = _pair(args.trim_range, 2, "--trim-range")
        if not 0 <= a0 <= a1 < 0.5:
            raise BadParamsError(f"--trim-range needs 0 <= a0 <= a1 < 0.5, got {a0},{a1}")
        opts["trim_range"] = (a0, a1)
    return opts


def _effect(view: TwoSampleView, args, opts) -> tuple[Estimate, ConfidenceInterval, dict]:
    model = get_model(args.model)
    extra = {"model": args.model, "report": args.report}
    work = view
    if args.model == "multiplicative":
        if view.control.min() <= 0 or view.treated.min() <= 0:
            raise BadParamsError("the multiplicative model needs positive outcomes")
        work = view.map(np.log)
    est, ci = estimate_with_ci(work, args.estimator, args.ci, args.level, **opts)
    shift = est.tau_hat
    theta = math.exp(shift) if args.model == "multiplicative" else shift

    if args.report == "theta":
        if args.model == "multiplicative":
            extra.update(log_effect=shift, log_var=est.var_hat)
            est = Estimate(theta, theta * theta * est.var_hat, est.method, est.diagnostics)
            ci = ConfidenceInterval(math.exp(ci.lo), math.exp(ci.hi), ci.level, ci.source)
        return est, ci, extra

    if args.report == "level":
        if args.model != "multiplicative":
            raise BadParamsError("--report level needs --model multiplicative")
        if args.level_means is not None:
            mu0, mu1 = _pair(args.level_means, 2, "--level-means")
        else:
            mu0, mu1 = float(view.control.mean()), float(view.treated.mean())
        p = args.level_p if args.level_p is not None else view.p
        lev = level_from_log(shift, mu0, mu1, p, est.var_hat)
        extra.update(log_effect=shift, log_var=est.var_hat, mu0=mu0, mu1=mu1, level_p=p)
        out = Estimate(lev.tau, lev.var, est.method, est.diagnostics)
        return out, normal_ci(out, args.level, ci.source), extra

    # in-sample and population effects: plug in theta, bootstrap the variance
    def ate(v: TwoSampleView) -> float:
        w = v.map(np.log) if args.model == "multiplicative" else v
        e = estimate_with_ci(w, args.estimator, "analytic", args.level, **opts)[0].tau_hat
        t = math.exp(e) if args.model == "multiplicative" else e
        if args.report == "is-ate":
            return in_sample_ate(v, model, t)
        return population_ate(v.control, model, t)

    value = in_sample_ate(view, model, theta) if args.report == "is-ate" else population_ate(view.control, model, theta)
    var = m_of_n_bootstrap_var(view, ate, m=min(args.boot_m, view.n), B=args.boot_B, seed=args.seed)
    extra.update(theta=theta, variance_source="bootstrap")
    out = Estimate(value, var, est.method, est.diagnostics)
    return out, normal_ci(out, args.level, "bootstrap"), extra


def cmd_estimate(args) -> int:
    opts = _options(args)
    y, z = read_csv(args.input)
    if z is None:
        raise BadParamsError("input CSV needs a 'z' column")
    view = split_sample(y, z)
    try:
        est, ci, extra = _effect(view, args, opts)
    except EstimationError as exc:
        doc = {"estimator": args.estimator, "error": exc.code, "message": str(exc),
               "n0": view.n0, "n1": view.n1, "p": view.p}
        _emit(json.dumps(doc, indent=2) + "\n", args.output)
        return 3
    doc = {
        "estimator": args.estimator,
        "tau_hat": est.tau_hat,
        "var_hat": est.var_hat,
        "ci": ci.to_dict(),
        "diagnostics": _jsonable({**est.diagnostics, **extra}),
        "n0": view.n0,
        "n1": view.n1,
        "p": view.p,
    }
    _emit(json.dumps(_jsonable(doc), indent=2) + "\n", args.output)
    return 0


# simulate ----------------------------------------------------------------


def cmd_simulate(args) -> int:
    spec = load_scenario(args.config)
    fields = {k: v for k, v in vars(spec).items()}
    fields["seed"] = args.seed
    if args.reps is not None:
        fields["reps"] = args.reps
    spec = ScenarioSpec(**fields)
    report = run_scenario(spec, workers=args.workers)
    if args.csv:
        Path(args.csv).write_text(report.to_csv(), encoding="utf-8")
    if args.metadata:
        Path(args.metadata).write_text(json.dumps(_jsonable(report.metadata()), indent=2) + "\n", encoding="utf-8")
    _emit(report.to_text(), args.output)
    return 0


# weights -----------------------------------------------------------------


def _law_weights(law: Law, size: int):
    u = np.arange(1, size + 1) / (size + 1)
    x = law.ppf(u)
    w = np.asarray(law.efficient_weight(u), dtype=float)
    for ua, mass in law.weight_atoms:
        # a point mass is represented on the nearest grid level
        w[np.argmin(np.abs(u - ua))] += mass * (size + 1)
    return u, w, np.zeros(size, dtype=bool), law.pdf(x), law.score_d1(x)


def cmd_weights(args) -> int:
    if (args.law is None) == (args.input is None):
        raise BadParamsError("give exactly one of --input and --law")
    if args.law is not None:
        params = {}
        if args.k1 is not None:
            params["k1"] = args.k1
        if args.k2 is not None:
            params["k2"] = args.k2
        law = get_law(args.law, **params)
        if not isinstance(law, Law):
            raise BadParamsError("--law needs a closed-form law")
        u, w, cut, fh, l2 = _law_weights(law, args.grid_size)
    else:
        y, z = read_csv(args.input)
        if z is None:
            view = from_arms(y, y)
        else:
            view = split_sample(y, z)
        if view.n1 > view.n0:
            view = view.swapped()
        fit = fit_adaptive_density(view.control)
        ww = waq_weights(fit, view)
        u, w, cut = ww.u_grid, ww.w, ww.truncated_mask
        fh = eval_density(fit, ww.quantile)
        l2 = eval_lpsi(fit, ww.quantile, 2)
    mean1 = w / np.mean(w)
    buf = [["u", "w", "w_sum1", "truncated", "f_hat", "lpsi2"]]
    sum1 = w / np.sum(w)
    for row in zip(u, mean1, sum1, cut, fh, l2):
        buf.append([repr(float(row[0])), repr(float(row[1])), repr(float(row[2])), int(row[3]),
                    repr(float(row[4])), repr(float(row[5]))])
    text = "\n".join(",".join(str(c) for c in r) for r in buf) + "\n"
    _emit(text, args.output)
    return 0


# entry point -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="semitreat", description="Efficient treatment effect estimation for randomized experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("estimate", help="estimate a treatment effect from a y,z CSV file")
    e.add_argument("--input", "-i", required=True, help="CSV with columns y and z ('-' for stdin)")
    e.add_argument("--output", "-o", help="JSON output path (default stdout)")
    e.add_argument("--estimator", choices=ESTIMATOR_NAMES, default="eif")
    e.add_argument("--trim-mode", choices=sorted(_TRIM_MODES), default="asym")
    e.add_argument("--trim-range", metavar="A0,A1")
    e.add_argument("--split", action="store_true", help="cross-fit densities on random halves")
    e.add_argument("--eif-mode", choices=("root", "onestep"), default="root")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--model", choices=("additive", "multiplicative"), default="additive")
    e.add_argument("--report", choices=("theta", "is-ate", "pop-ate", "level"), default="theta")
    e.add_argument("--level-means", metavar="MU0,MU1")
    e.add_argument("--level-p", type=float)
    e.add_argument("--ci", choices=("analytic", "bootstrap"), default="analytic")
    e.add_argument("--level", type=float, default=0.95, help="confidence level")
    e.add_argument("--boot-m", type=int, default=2000)
    e.add_argument("--boot-B", type=int, default=200)
    e.set_defaults(func=cmd_estimate)

    s = sub.add_parser("simulate", help="run a Monte Carlo scenario from a JSON or TOML file")
    s.add_argument("--config", "-c", required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--reps", type=int)
    s.add_argument("--output-csv", "--csv", dest="csv", help="write the report as CSV to this path")
    s.add_argument("--metadata", help="write run metadata as JSON to this path")
    s.add_argument("--output-text", "--output", "-o", dest="output", help="text table path (default stdout)")
    s.add_argument("--workers", type=int, help="worker processes (default $SEMITREAT_THREADS or 1)")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("weights", help="write efficient quantile weights as CSV")
    w.add_argument("--input", "-i", help="CSV with column y (and z; the control arm is used)")
    w.add_argument("--law", choices=("normal", "laplace", "cauchy", "huber"))
    w.add_argument("--k1", type=float)
    w.add_argument("--k2", type=float)
    w.add_argument("--grid-size", type=int, default=999)
    w.add_argument("--output", "-o")
    w.set_defaults(func=cmd_weights)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"semitreat: error: {exc}", file=sys.stderr)
        return 2
    except InputError as exc:
        print(f"semitreat: error: {exc.code}: {exc}", file=sys.stderr)
        return 2
    except SemitreatError as exc:
        print(f"semitreat: error: {exc.code}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
