"""Command-line interface: ``splcm <subcommand> [options]``.

Every option can also come from a JSON file given with ``--config``; flags
on the command line win. A run writes its outputs plus ``manifest.json``,
which holds the effective configuration. Passing that manifest back through
``--config`` repeats the run and reproduces the output files byte for byte.

Exit codes: 0 success, 1 numerical failure (a partial report is still
written), 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .admm import SplcmConfig, fit as admm_fit, soft_threshold_estimate
from .csvio import read_matrix, write_json, write_matrix, write_table
from .downstream import (
    bootstrap_error_cov,
    corr_from_cov,
    hier_cluster,
    qda_fit,
    qda_predict,
    qda_split_protocol,
)
from .estimator import SoftThresholdCovariance, sparse_lcm
from .exceptions import NonConvergenceWarning, NumericalError, SplcmError
from .clime import plugin_precision
from .simbench import (
    METHODS,
    CovModelSpec,
    MetricReport,
    gen_cov,
    roc_curve,
    run_experiment,
    sample_gaussian,
)
from .tuning import RHO_MULTIPLIERS, TuneGrid, bic_score, grid_search, lambda_path, default_lambdas
from .wishart import ErrorPrecision

SCHEMA_VERSION = 1
EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2
# keys that never change output contents and are left out of the manifest
NON_SEMANTIC = ("config", "out", "threads")


class UsageError(SplcmError):
    pass


ADMM_OPTS = {
    "gamma": (float, None, "ADMM step (default: from the spectrum of the weight)"),
    "delta": (float, None, "positive-definite floor (default 1e-4 * mean variance)"),
    "max_iter": (int, 1000, "ADMM iteration cap"),
    "eps_abs": (float, 1e-6, "absolute stopping tolerance"),
    "eps_rel": (float, 1e-5, "relative stopping tolerance"),
    "solver": (str, "auto", "sigma-step solver: auto, dense or cg"),
}

INPUT_OPTS = {
    "data": (str, None, "CSV of observations (rows) by variables"),
    "cov": (str, None, "CSV sample covariance (requires --n)"),
    "n": (int, None, "sample size behind --cov"),
    "center": (bool, False, "subtract column means before forming S"),
}

PRECISION_OPTS = {
    "tau": (float, None, "CLIME hard threshold (default rho)"),
    "identity_precision": (bool, False, "use Omega = I (soft-thresholding mode)"),
    "oracle_precision": (str, None, "CSV with a known inverse covariance"),
}

COMMANDS = {
    "estimate": {
        **INPUT_OPTS,
        "lam": (float, None, "penalty lambda (required)"),
        "rho": (float, None, "CLIME level (default 0.2 * sqrt(log p / n))"),
        **PRECISION_OPTS,
        **ADMM_OPTS,
    },
    "tune": {
        **INPUT_OPTS,
        "lambdas": (str, None, "comma-separated lambda grid (default: 20-point path)"),
        "rhos": (str, None, "comma-separated rho grid (default: 4 levels)"),
        **PRECISION_OPTS,
        **ADMM_OPTS,
    },
    "simulate": {
        "model": (str, None, "ma1, random or hub"),
        "p": (int, None, "dimension"),
        "n": (int, None, "sample size per replicate"),
        "reps": (int, 20, "number of replicates"),
        "methods": (str, "splcm,splcm-oracle,soft", f"comma-separated subset of {','.join(METHODS)}"),
        "seed": (int, 0, "base seed; replicate i uses seed XOR i"),
        "model_seed": (int, 0, "seed of the Random/Hub pattern"),
        "prob": (float, 0.02, "edge probability of the Random model"),
        "value": (float, None, "nonzero magnitude (default 0.4 for MA(1), 1 otherwise)"),
        "roc": (bool, True, "write per-replicate ROC files"),
    },
    "qda": {
        "data": (str, None, "labeled CSV; the last column is an integer class"),
        "test": (str, None, "CSV to classify (labeled or not)"),
        "covariance": (str, "splcm", "splcm, soft or sample"),
        "splits": (int, None, "number of random stratified splits"),
        "train_frac": (float, 0.5, "training fraction per class"),
        "seed": (int, 0, "base seed for the splits"),
    },
    "cluster": {
        "data": (str, None, "CSV of observations by variables"),
        "corr": (str, None, "CSV correlation matrix (skips estimation)"),
        "covariance": (str, "splcm", "splcm, soft or sample"),
        "lam": (float, None, "penalty (default: BIC)"),
        "rho": (float, None, "CLIME level (default: BIC)"),
        "linkage": (str, "average", "average or complete"),
        "scale": (bool, True, "standardize variables before estimation"),
    },
    "bootstrap-v": {
        "data": (str, None, "CSV of observations by variables"),
        "n_boot": (int, 1000, "number of bootstrap datasets"),
        "seed": (int, 0, "resampling seed"),
        "center": (bool, False, "subtract column means first"),
        "lam": (float, None, "if given, also fit with the bootstrap weight"),
        **ADMM_OPTS,
    },
}

FLAG_NAMES = {"lam": "lambda", "n_boot": "N"}


def _flag(key: str) -> str:
    return "--" + FLAG_NAMES.get(key, key).replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splcm", description="Sparse linear covariance model estimator.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, opts in COMMANDS.items():
        sp = sub.add_parser(name, argument_default=argparse.SUPPRESS)
        sp.add_argument("--config", help="JSON file of options (a manifest also works)")
        sp.add_argument("--out", help="output directory (default: current directory)")
        sp.add_argument("--threads", type=int, help="worker threads (capped by SPLCM_THREADS)")
        for key, (typ, default, help_) in opts.items():
            if typ is bool:
                sp.add_argument(_flag(key), dest=key, action=argparse.BooleanOptionalAction, help=help_)
            else:
                sp.add_argument(_flag(key), dest=key, type=typ, help=f"{help_} [default: {default}]")
    return parser


def _coerce(cmd: str, key: str, value):
    opts = COMMANDS[cmd]
    if key not in opts:
        raise UsageError(f"unknown option {key!r} for {cmd}")
    typ = opts[key][0]
    if value is None:
        return None
    try:
        if typ is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        return typ(value)
    except (TypeError, ValueError):
        raise UsageError(f"option {key!r} expects {typ.__name__}, got {value!r}") from None


def effective_config(cmd: str, args: argparse.Namespace) -> dict:
    """Defaults, then the JSON config, then explicit flags."""
    cfg = {k: v[1] for k, v in COMMANDS[cmd].items()}
    given = vars(args)
    if given.get("config"):
        try:
            with open(given["config"]) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {given['config']}: {exc}") from exc
        if isinstance(loaded, dict) and "schema_version" in loaded and "config" in loaded:
            if loaded.get("command") not in (None, cmd):
                raise UsageError(f"manifest is for {loaded['command']!r}, not {cmd!r}")
            loaded = loaded["config"]
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        for k, v in loaded.items():
            if k in NON_SEMANTIC:
                continue
            cfg[k] = _coerce(cmd, k, v)
    for k, v in given.items():
        if k in ("command",) + NON_SEMANTIC:
            continue
        cfg[k] = v
    return cfg


def thread_count(requested) -> int:
    n = 1 if requested is None else int(requested)
    cap = os.environ.get("SPLCM_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise UsageError(f"SPLCM_THREADS must be an integer, got {cap!r}") from None
    return max(1, n)


def _floats(text, name):
    if text is None:
        return None
    try:
        vals = [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"--{name} must be comma-separated numbers") from None
    if not vals:
        raise UsageError(f"--{name} must not be empty")
    return vals


def _admm_config(cfg) -> SplcmConfig:
    try:
        return SplcmConfig(
            lam=0.0,
            gamma=cfg.get("gamma"),
            delta=cfg.get("delta"),
            eps_abs=cfg["eps_abs"],
            eps_rel=cfg["eps_rel"],
            max_iter=cfg["max_iter"],
            solver=cfg["solver"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _load_s(cfg):
    """Sample covariance and its sample size from --data or --cov."""
    if bool(cfg.get("data")) == bool(cfg.get("cov")):
        raise UsageError("give exactly one of --data and --cov")
    if cfg.get("data"):
        y, _ = read_matrix(cfg["data"])
        if y.shape[1] < 2:
            raise UsageError("data must have at least two columns")
        if cfg.get("center"):
            y = y - y.mean(axis=0)
        s = y.T @ y / y.shape[0]
        return 0.5 * (s + s.T), y.shape[0]
    if cfg.get("n") is None:
        raise UsageError("--cov requires --n")
    if cfg["n"] < 1:
        raise UsageError("--n must be positive")
    s, _ = read_matrix(cfg["cov"])
    if s.shape[0] != s.shape[1]:
        raise UsageError(f"covariance must be square, got {s.shape}")
    if np.abs(s - s.T).max() > 1e-8 * max(1.0, np.abs(s).max()):
        raise UsageError("covariance must be symmetric")
    return 0.5 * (s + s.T), int(cfg["n"])


def _precision(cfg, p):
    if cfg.get("identity_precision") and cfg.get("oracle_precision"):
        raise UsageError("--identity-precision and --oracle-precision are exclusive")
    if cfg.get("identity_precision"):
        return "identity"
    if cfg.get("oracle_precision"):
        om, _ = read_matrix(cfg["oracle_precision"])
        if om.shape != (p, p):
            raise UsageError(f"oracle precision must be {p}x{p}, got {om.shape}")
        return om
    return "clime"


def _fit_report(f, extra) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "status": "converged" if f.converged else "not_converged",
        "iterations": f.iterations,
        "primal_residual": f.primal_residual,
        "dual_residual": f.dual_residual,
        "min_eigenvalue": f.min_eigenvalue,
        "support_size": f.support_size,
        "delta": f.delta,
        "notes": list(f.notes),
        **extra,
    }


def _manifest(out: Path, cmd: str, cfg: dict, outputs, seeds=None) -> None:
    write_json(
        out / "manifest.json",
        {
            "schema_version": SCHEMA_VERSION,
            "command": cmd,
            "version": __version__,
            "config": {k: v for k, v in sorted(cfg.items()) if k not in NON_SEMANTIC},
            "seeds": seeds or {},
            "outputs": sorted(outputs),
        },
    )


def cmd_estimate(cfg, out: Path, threads: int) -> int:
    s, n = _load_s(cfg)
    p = s.shape[0]
    if cfg.get("lam") is None:
        raise UsageError("estimate needs --lambda (use `tune` to select it)")
    if cfg["lam"] < 0:
        raise UsageError("--lambda must be >= 0")
    precision = _precision(cfg, p)
    rho = cfg.get("rho")
    if isinstance(precision, str) and precision == "clime" and rho is None:
        rho = RHO_MULTIPLIERS[2] * float(np.sqrt(np.log(p) / n))
    cfg = {**cfg, "rho": rho}
    admm = _admm_config(cfg)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NonConvergenceWarning)
            f, info = sparse_lcm(s, n, lam=cfg["lam"], rho=rho, tau=cfg.get("tau"), precision=precision, cfg=admm)
    except NumericalError as exc:
        write_json(out / "report.json", {"schema_version": SCHEMA_VERSION, "status": "error", "error": str(exc)})
        _manifest(out, "estimate", cfg, ["report.json"])
        print(f"splcm: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    write_matrix(out / "sigma_hat.csv", f.sigma_hat)
    write_json(out / "report.json", _fit_report(f, {"lambda": info["lambda"], "rho": info["rho"], "bic": info["bic"], "n": n, "p": p}))
    _manifest(out, "estimate", cfg, ["sigma_hat.csv", "report.json"])
    return EXIT_OK if f.converged else EXIT_NUMERICAL


def _write_tuning(path, rows):
    write_table(path, ["lambda", "rho", "bic", "support", "converged"], [(r.lam, r.rho, r.bic, r.support, r.converged) for r in rows])


def cmd_tune(cfg, out: Path, threads: int) -> int:
    s, n = _load_s(cfg)
    p = s.shape[0]
    lambdas = _floats(cfg.get("lambdas"), "lambdas")
    rhos = _floats(cfg.get("rhos"), "rhos")
    try:
        grid = TuneGrid(lambdas=None if lambdas is None else tuple(lambdas), rhos=None if rhos is None else tuple(rhos))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    precision = _precision(cfg, p)
    prec = None if isinstance(precision, str) and precision == "clime" else (np.eye(p) if isinstance(precision, str) else precision)
    admm = _admm_config(cfg)
    try:
        res = grid_search(s, n, grid=grid, cfg=admm, tau=cfg.get("tau"), precision=prec, threads=threads)
    except NumericalError as exc:
        write_json(out / "report.json", {"schema_version": SCHEMA_VERSION, "status": "error", "error": str(exc)})
        _manifest(out, "tune", cfg, ["report.json"])
        print(f"splcm: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    _write_tuning(out / "tuning.csv", res.table)
    write_matrix(out / "sigma_hat.csv", res.fit.sigma_hat)
    rho = None if prec is not None else res.rho
    write_json(out / "report.json", _fit_report(res.fit, {"lambda": res.lam, "rho": rho, "bic": res.bic, "n": n, "p": p, "cells": len(res.table)}))
    _manifest(out, "tune", cfg, ["sigma_hat.csv", "tuning.csv", "report.json"])
    return EXIT_OK


METRIC_FIELDS = list(MetricReport.__dataclass_fields__)
MODEL_NAMES = {"ma1": "MA1", "random": "Random", "hub": "Hub"}


def _roc_points(method, s, n, sigma_star, tuning):
    if method == "soft":
        off = np.abs(s - np.diag(np.diag(s))).max()
        path = []
        for lam in default_lambdas(float(off)):
            sup = soft_threshold_estimate(s, lam) != 0.0
            path.append((lam, sup))
        return roc_curve(path, sigma_star)
    if method == "splcm-oracle":
        omega = np.linalg.inv(sigma_star)
    else:
        omega = plugin_precision(s, tuning["rho"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergenceWarning)
        path = [(lam, f.active_set) for lam, f in lambda_path(s, n, omega) if f is not None]
    return roc_curve(path, sigma_star)


def cmd_simulate(cfg, out: Path, threads: int) -> int:
    for key in ("model", "p", "n"):
        if cfg.get(key) is None:
            raise UsageError(f"simulate needs {_flag(key)}")
    kind = MODEL_NAMES.get(str(cfg["model"]).lower())
    if kind is None:
        raise UsageError(f"--model must be one of {sorted(MODEL_NAMES)}")
    methods = [m.strip() for m in str(cfg["methods"]).split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if not methods or bad:
        raise UsageError(f"--methods must be a nonempty subset of {','.join(METHODS)}")
    if cfg["reps"] < 1 or cfg["n"] < 1:
        raise UsageError("--reps and --n must be positive")
    spec = CovModelSpec(kind=kind, p=cfg["p"], value=cfg.get("value"), prob=cfg["prob"], seed=cfg["model_seed"])
    try:
        res = run_experiment(spec, cfg["n"], cfg["reps"], base_seed=cfg["seed"], methods=methods, threads=threads)
    except NumericalError as exc:
        write_json(out / "summary.json", {"schema_version": SCHEMA_VERSION, "status": "error", "error": str(exc)})
        _manifest(out, "simulate", cfg, ["summary.json"])
        print(f"splcm: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    rows = []
    for rep in res.replicates:
        for m in methods:
            r = rep.metrics[m]
            rows.append([rep.index, rep.seed, m] + [getattr(r, k) for k in METRIC_FIELDS])
    with (out / "metrics.csv").open("w") as fh:
        fh.write(",".join(["replicate", "seed", "method"] + METRIC_FIELDS) + "\n")
        for row in rows:
            fh.write(",".join([str(row[0]), str(row[1]), row[2]] + ["%.17g" % v for v in row[3:]]) + "\n")
    outputs = ["metrics.csv", "summary.json"]
    if cfg["roc"]:
        roc_dir = out / "roc"
        roc_dir.mkdir(exist_ok=True)
        for rep in res.replicates:
            _, s = sample_gaussian(res.sigma_star, cfg["n"], rep.seed)
            for m in methods:
                if m == "sample":
                    continue
                pts = _roc_points(m, s, cfg["n"], res.sigma_star, rep.tuning.get(m, {}))
                name = f"roc/{m}_rep{rep.index:03d}.csv"
                write_table(out / name, ["lambda", "fpr", "tpr"], [(q.lam, q.fpr, q.tpr) for q in pts])
                outputs.append(name)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "status": "ok",
        "model": kind,
        "p": cfg["p"],
        "n": cfg["n"],
        "reps": cfg["reps"],
        "methods": res.summary(),
        "tuning": [{"replicate": r.index, "seed": r.seed, **{m: r.tuning[m] for m in r.tuning}} for r in res.replicates],
    }
    if "splcm" in methods and "splcm-oracle" in methods:
        summary["oracle_vs_estimated"] = {
            k: {"splcm": res.mean("splcm", k), "splcm-oracle": res.mean("splcm-oracle", k)}
            for k in ("offdiag_l2", "frobenius", "opnorm", "tpr", "fpr")
        }
    write_json(out / "summary.json", summary)
    seeds = {"base": cfg["seed"], "model": cfg["model_seed"], "replicates": [r.seed for r in res.replicates]}
    _manifest(out, "simulate", cfg, outputs, seeds)
    return EXIT_OK


def _labeled(path):
    arr, _ = read_matrix(path)
    if arr.shape[1] < 2:
        raise UsageError(f"{path}: need at least one feature column and a label column")
    lab = arr[:, -1]
    if not np.all(lab == np.round(lab)):
        raise UsageError(f"{path}: last column must hold integer class labels")
    return arr[:, :-1], lab.astype(int)


def cmd_qda(cfg, out: Path, threads: int) -> int:
    if not cfg.get("data"):
        raise UsageError("qda needs --data")
    if cfg["covariance"] not in ("splcm", "soft", "sample"):
        raise UsageError("--covariance must be splcm, soft or sample")
    x, lab = _labeled(cfg["data"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergenceWarning)
        if cfg.get("splits") is not None:
            if cfg["splits"] < 1:
                raise UsageError("--splits must be positive")
            rates = qda_split_protocol(x, lab, cfg["covariance"], cfg["splits"], cfg["train_frac"], cfg["seed"])
            write_table(out / "rates.csv", ["split", "misclassification"], list(enumerate(rates)))
            write_json(out / "report.json", {"schema_version": SCHEMA_VERSION, "status": "ok", "splits": len(rates), "mean_misclassification": float(np.mean(rates)), "sd_misclassification": float(np.std(rates, ddof=1)) if len(rates) > 1 else 0.0})
            _manifest(out, "qda", cfg, ["rates.csv", "report.json"], {"splits": cfg["seed"]})
            return EXIT_OK
        model = qda_fit(x, lab, cfg["covariance"])
        truth = lab
        target = x
        if cfg.get("test"):
            t, _ = read_matrix(cfg["test"])
            if t.shape[1] == x.shape[1] + 1:
                target, truth = t[:, :-1], t[:, -1].astype(int)
            elif t.shape[1] == x.shape[1]:
                target, truth = t, None
            else:
                raise UsageError(f"test file has {t.shape[1]} columns; expected {x.shape[1]} or {x.shape[1] + 1}")
        pred = qda_predict(model, target)
    write_table(out / "predictions.csv", ["row", "label"], list(enumerate(pred)))
    report = {"schema_version": SCHEMA_VERSION, "status": "ok", "classes": model.classes.tolist(), "priors": model.priors.tolist()}
    if truth is not None:
        report["misclassification"] = float(np.mean(pred != truth))
    write_json(out / "report.json", report)
    _manifest(out, "qda", cfg, ["predictions.csv", "report.json"])
    return EXIT_OK


def cmd_cluster(cfg, out: Path, threads: int) -> int:
    if bool(cfg.get("data")) == bool(cfg.get("corr")):
        raise UsageError("give exactly one of --data and --corr")
    if cfg["linkage"] not in ("average", "complete"):
        raise UsageError("--linkage must be average or complete")
    report = {"schema_version": SCHEMA_VERSION, "status": "ok"}
    if cfg.get("corr"):
        r, _ = read_matrix(cfg["corr"])
    else:
        y, _ = read_matrix(cfg["data"])
        if cfg["scale"]:
            sd = y.std(axis=0)
            if np.any(sd == 0):
                raise UsageError("a variable is constant and cannot be scaled")
            y = (y - y.mean(axis=0)) / sd
        n = y.shape[0]
        s = y.T @ y / n
        s = 0.5 * (s + s.T)
        cov = cfg["covariance"]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NonConvergenceWarning)
            if cov == "splcm":
                f, info = sparse_lcm(s, n, lam=cfg.get("lam"), rho=cfg.get("rho"))
                sigma = f.sigma_hat
                report.update({"lambda": info["lambda"], "rho": info["rho"], "support_size": f.support_size})
            elif cov == "soft":
                est = SoftThresholdCovariance(lam=cfg.get("lam")).fit_covariance(s, n)
                sigma = est.covariance_
                report.update({"lambda": est.lambda_})
            elif cov == "sample":
                sigma = s
            else:
                raise UsageError("--covariance must be splcm, soft or sample")
        r = corr_from_cov(sigma)
    dend = hier_cluster(r, cfg["linkage"])
    write_matrix(out / "correlation.csv", r)
    write_table(
        out / "dendrogram.csv",
        ["step", "a", "b", "height"],
        [(i, int(a), int(b), h) for i, ((a, b), h) in enumerate(zip(dend.merges, dend.heights))],
    )
    write_json(out / "report.json", report)
    _manifest(out, "cluster", cfg, ["correlation.csv", "dendrogram.csv", "report.json"])
    return EXIT_OK


def cmd_bootstrap_v(cfg, out: Path, threads: int) -> int:
    if not cfg.get("data"):
        raise UsageError("bootstrap-v needs --data")
    if cfg["n_boot"] < 2:
        raise UsageError("--N must be at least 2")
    y, _ = read_matrix(cfg["data"])
    if cfg["center"]:
        y = y - y.mean(axis=0)
    v = bootstrap_error_cov(y, cfg["n_boot"], cfg["seed"])
    write_matrix(out / "v_boot.csv", v)
    outputs = ["v_boot.csv"]
    code = EXIT_OK
    if cfg.get("lam") is not None:
        n = y.shape[0]
        s = y.T @ y / n
        s = 0.5 * (s + s.T)
        admm = _admm_config(cfg)
        try:
            ep = ErrorPrecision.from_error_cov(v, n)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", NonConvergenceWarning)
                f = admm_fit(s, ep, SplcmConfig(**{**admm.__dict__, "lam": cfg["lam"]}))
        except NumericalError as exc:
            write_json(out / "report.json", {"schema_version": SCHEMA_VERSION, "status": "error", "error": str(exc)})
            _manifest(out, "bootstrap-v", cfg, outputs + ["report.json"], {"bootstrap": cfg["seed"]})
            print(f"splcm: numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        write_matrix(out / "sigma_hat.csv", f.sigma_hat)
        write_json(out / "report.json", _fit_report(f, {"lambda": cfg["lam"], "bic": bic_score(s, f, n)}))
        outputs += ["sigma_hat.csv", "report.json"]
        code = EXIT_OK if f.converged else EXIT_NUMERICAL
    _manifest(out, "bootstrap-v", cfg, outputs, {"bootstrap": cfg["seed"]})
    return code


HANDLERS = {
    "estimate": cmd_estimate,
    "tune": cmd_tune,
    "simulate": cmd_simulate,
    "qda": cmd_qda,
    "cluster": cmd_cluster,
    "bootstrap-v": cmd_bootstrap_v,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    cmd = args.command
    try:
        cfg = effective_config(cmd, args)
        threads = thread_count(getattr(args, "threads", None))
        out = Path(getattr(args, "out", None) or ".")
        out.mkdir(parents=True, exist_ok=True)
        return HANDLERS[cmd](cfg, out, threads)
    except NumericalError as exc:
        print(f"splcm: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (SplcmError, ValueError) as exc:
        print(f"splcm {cmd}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
