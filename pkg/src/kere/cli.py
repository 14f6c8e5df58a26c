"""Command-line interface: fit, path, cv, predict, simulate and bench."""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .bench import DEFAULT_LEVELS, BenchConfig, bench_path_config, mad_table, rep_rows, run_bench, \
    sim1_curves, timing_rows
from .io import DataError, load_csv, write_csv, write_json
from .kernel import KernelSpec, Standardizer, build_bundle
from .loss import as_level
from .model import Model, fit_model
from .path import PathConfig, fit_path
from .select import CVConfig, cross_validate
from .sim import SIM1_ERRORS, SIM2_ERRORS, Sim1Spec, Sim2Spec, sim1_generate, sim2_generate, \
    true_expectile
from .solver import optimality_certificate

ERROR_ALIASES = {"mixed": "mixed_normal", "mixture": "mixed_normal", "t": "t4"}


class CLIError(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CLIError("usage", message)


def _floats(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _onoff(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return text == "on"


def _common(p, omega_required=False):
    p.add_argument("--omega", type=float, required=omega_required)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)


def _data_flags(p, response_required=True):
    p.add_argument("--data", required=True)
    p.add_argument("--response", required=response_required)


def _kernel_flags(p):
    p.add_argument("--kernel", choices=("rbf", "poly", "sigmoid", "linear"), default="rbf")
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--standardize", type=_onoff, default=None, metavar="{on,off}")


def _solver_flags(p):
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=100)


def _path_flags(p):
    p.add_argument("--lambda-max", type=float, default=None)
    p.add_argument("--lambda-min", type=float, default=None)
    p.add_argument("--nlambda", type=int, default=100)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kere", description="Kernel expectile regression.")
    parser.add_argument("--version", action="version", version=f"kere {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit at one (omega, lambda) and write a model file")
    _data_flags(p)
    _common(p, omega_required=True)
    _kernel_flags(p)
    _solver_flags(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True)

    p = sub.add_parser("path", help="fit a warm-started lambda path and write per-lambda rows")
    _data_flags(p)
    _common(p, omega_required=True)
    _kernel_flags(p)
    _solver_flags(p)
    _path_flags(p)

    p = sub.add_parser("cv", help="cross-validate over (sigma2, lambda)")
    _data_flags(p)
    _common(p, omega_required=True)
    _kernel_flags(p)
    _solver_flags(p)
    _path_flags(p)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--sigma2-grid", type=_floats, default=None)
    p.add_argument("--model-out", default=None, help="also refit at the selected cell and save it")

    p = sub.add_parser("predict", help="predict from a saved model")
    p.add_argument("--model", required=True)
    _data_flags(p, response_required=False)
    _common(p)

    p = sub.add_parser("simulate", help="write a simulated dataset")
    p.add_argument("design", choices=("sim1", "sim2"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, default=10)
    p.add_argument("--error", default=None)
    p.add_argument("--heteroscedastic", action="store_true")
    _common(p)

    p = sub.add_parser("bench", help="desk-scale simulation study (MAD tables)")
    p.add_argument("design", choices=("sim1", "sim2"))
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--omegas", type=_floats, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--n-test", type=int, default=2000)
    p.add_argument("--p", type=int, default=10)
    p.add_argument("--error", default=None)
    p.add_argument("--heteroscedastic", action="store_true")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--curves", action="store_true", help="also write tidy curve rows (sim1)")
    _path_flags(p)
    p.set_defaults(nlambda=None)
    _solver_flags(p)
    p.set_defaults(max_iter=None)
    _common(p)
    return parser


# ---------------------------------------------------------------------------
# validation

def _check_omega(w):
    if w is not None:
        as_level(w)


def _kernel(args) -> KernelSpec:
    fam = "polynomial" if args.kernel == "poly" else args.kernel
    return KernelSpec(fam, sigma2=args.sigma2, kappa=args.kappa, theta=args.theta, degree=args.degree)


def _path_config(args) -> PathConfig:
    return PathConfig(lambda_max=args.lambda_max, lambda_min=args.lambda_min,
                      n_lambda=args.nlambda, tol=args.tol, max_iter=args.max_iter)


def _error_family(design: str, name: str | None) -> str:
    if name is None:
        return "mixed_normal" if design == "sim1" else "normal"
    fam = ERROR_ALIASES.get(name, name)
    allowed = SIM1_ERRORS if design == "sim1" else SIM2_ERRORS
    if fam not in allowed:
        raise CLIError("invalid_flag", f"--error for {design} must be one of {allowed}, got {name!r}")
    return fam


def validate(args) -> None:
    """Flag checks that must pass before any computation."""
    _check_omega(getattr(args, "omega", None))
    if hasattr(args, "kernel"):
        _kernel(args)
    if getattr(args, "tol", None) is not None and not args.tol > 0:
        raise CLIError("invalid_flag", "--tol must be positive")
    if getattr(args, "max_iter", None) is not None and args.max_iter < 1:
        raise CLIError("invalid_flag", "--max-iter must be >= 1")
    if getattr(args, "lam", None) is not None and not args.lam > 0:
        raise CLIError("invalid_flag", "--lambda must be positive")
    if getattr(args, "lambda_max", None) is not None or getattr(args, "lambda_min", None) is not None:
        lo, hi = args.lambda_min, args.lambda_max
        if (lo is not None and not lo > 0) or (hi is not None and not hi > 0):
            raise CLIError("invalid_flag", "lambda bounds must be positive")
        if lo is not None and hi is not None and not lo < hi:
            raise CLIError("invalid_flag", "--lambda-min must be below --lambda-max")
        if lo is not None and hi is None:
            raise CLIError("invalid_flag", "--lambda-min needs --lambda-max")
    if getattr(args, "nlambda", None) is not None and args.nlambda < 2:
        raise CLIError("invalid_flag", "--nlambda must be >= 2")
    if getattr(args, "folds", None) is not None and args.folds < 2:
        raise CLIError("invalid_flag", "--folds must be >= 2")
    if getattr(args, "sigma2_grid", None) is not None and min(args.sigma2_grid) <= 0:
        raise CLIError("invalid_flag", "--sigma2-grid entries must be positive")
    if args.command in ("simulate", "bench"):
        args.error = _error_family(args.design, args.error)
        if args.design == "sim1" and args.heteroscedastic:
            raise CLIError("invalid_flag", "--heteroscedastic applies to sim2 only")
        if args.n is not None and args.n < 2:
            raise CLIError("invalid_flag", "--n must be >= 2")
        if args.p < 1:
            raise CLIError("invalid_flag", "--p must be >= 1")
    if args.command == "bench":
        if args.reps < 1:
            raise CLIError("invalid_flag", "--reps must be >= 1")
        if args.omegas is not None and args.omega is not None:
            raise CLIError("invalid_flag", "give --omega or --omegas, not both")
        for w in args.omegas or ():
            _check_omega(w)
        if args.curves and args.design != "sim1":
            raise CLIError("invalid_flag", "--curves is only defined for sim1")


# ---------------------------------------------------------------------------
# commands

def _flags(args) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(vars(args).items())}


def _header(args) -> dict:
    return {"kere_version": __version__, "command": args.command, "seed": args.seed, "flags": _flags(args)}


def _sidecar(out) -> Path:
    return Path(str(out) + ".json")


def _stem(out, suffix) -> Path:
    out = Path(out)
    return out.with_name(out.stem + suffix)


def _warn_nonconverged(what: str, n_bad: int):
    if n_bad:
        print(json.dumps({"warning": "not_converged", "detail": f"{n_bad} {what} hit max_iter"}),
              file=sys.stderr)


def _load(args):
    ds = load_csv(args.data, args.response)
    if ds.y is None:
        raise CLIError("invalid_flag", "--response is required for this command")
    return ds


def cmd_fit(args):
    ds = _load(args)
    kernel = _kernel(args)
    model = fit_model(ds.X, ds.y, args.omega, args.lam, kernel=kernel, standardize=args.standardize,
                      tol=args.tol, max_iter=args.max_iter)
    model.meta = {**_header(args), "data": ds.provenance()}
    _warn_nonconverged("fit", int(not model.diagnostics["converged"]))
    model.save(args.out)


def _bundle(args, ds):
    kernel = _kernel(args)
    standardize = kernel.family == "rbf" if args.standardize is None else args.standardize
    Xs = Standardizer.fit(ds.X).transform(ds.X) if standardize else ds.X
    return build_bundle(kernel, Xs)


def cmd_path(args):
    ds = _load(args)
    bundle = _bundle(args, ds)
    level = as_level(args.omega)
    res = fit_path(bundle, ds.y, level, _path_config(args))
    rows = res.rows()
    for row, coef, lam in zip(rows, res.coefs, res.lambdas):
        row["certificate"] = optimality_certificate(coef, bundle, ds.y, level, lam)
    write_csv(args.out, rows)
    coef_rows = [{"lambda": float(lam), **{f"alpha{i + 1}": a for i, a in enumerate(c.alpha)}}
                 for lam, c in zip(res.lambdas, res.coefs)]
    write_csv(_stem(args.out, ".coefficients.csv"), coef_rows)
    _warn_nonconverged("path points", int((~res.converged).sum()))
    write_json(_sidecar(args.out), {**_header(args), "data": ds.provenance(),
                                    "n_lambda": len(rows), "all_converged": bool(res.converged.all())})


def cmd_cv(args):
    ds = _load(args)
    cfg = CVConfig(level=args.omega, folds=args.folds, sigma2_grid=args.sigma2_grid,
                   path_config=_path_config(args), seed=args.seed, kernel=_kernel(args),
                   standardize=args.standardize)
    if args.folds > ds.n:
        raise CLIError("invalid_flag", f"--folds {args.folds} exceeds n = {ds.n}")
    cache: dict = {}
    res = cross_validate(ds.X, ds.y, cfg, cache=cache)
    write_csv(args.out, res.grid_rows())
    _warn_nonconverged("grid cells", int((~res.valid).sum()))
    summary = {**_header(args), "data": ds.provenance(), "best_sigma2": res.best_sigma2,
               "best_lambda": res.best_lambda, "best_cv_loss": float(res.cv_loss[res.best_index]),
               "best_index": list(res.best_index), "fold_sizes": res.fold_sizes(),
               "folds": res.folds.tolist()}
    if args.model_out:
        from .select import fit_selected
        model = fit_selected(ds.X, ds.y, res, cfg, cache=cache)
        model.meta = {**_header(args), "data": ds.provenance()}
        model.save(args.model_out)
        summary["model_out"] = args.model_out
    write_json(_sidecar(args.out), summary)


def cmd_predict(args):
    model = Model.load(args.model)
    ds = load_csv(args.data, args.response)
    if ds.p != model.X.shape[1]:
        raise CLIError("dimension_mismatch", f"model expects {model.X.shape[1]} features, data has {ds.p}")
    pred = model.predict(ds.X)
    rows = [{"prediction": v} for v in pred]
    omega = model.omega if args.omega is None else args.omega
    if ds.y is not None:
        from .loss import loss_value
        for row, y, v in zip(rows, ds.y, pred):
            row["response"] = y
            row["loss"] = float(loss_value(y - v, omega))
    write_csv(args.out, rows)
    write_json(_sidecar(args.out), {**_header(args), "data": ds.provenance(), "omega": omega,
                                    "model_omega": model.omega, "n": ds.n})


def _sim_spec(args):
    if args.design == "sim1":
        return Sim1Spec(args.n, args.error, args.seed)
    return Sim2Spec(args.n, args.p, args.heteroscedastic, args.error, args.seed)


def cmd_simulate(args):
    spec = _sim_spec(args)
    X, y = sim1_generate(spec) if args.design == "sim1" else sim2_generate(spec)
    names = ["x"] if X.shape[1] == 1 else [f"x{j + 1}" for j in range(X.shape[1])]
    cols = {nm: X[:, j] for j, nm in enumerate(names)}
    cols["y"] = y
    if args.omega is not None:
        cols["true_expectile"] = true_expectile(spec, X, args.omega)
    rows = [dict(zip(cols, vals)) for vals in zip(*cols.values())]
    write_csv(args.out, rows, list(cols))
    write_json(_sidecar(args.out), {**_header(args), "spec": spec.to_dict()})


def cmd_bench(args):
    omegas = args.omegas or ((args.omega,) if args.omega is not None else DEFAULT_LEVELS)
    pc = bench_path_config()
    pc = PathConfig(lambda_max=args.lambda_max, lambda_min=args.lambda_min,
                    n_lambda=args.nlambda or pc.n_lambda, lambda_min_ratio=pc.lambda_min_ratio,
                    tol=args.tol if args.tol is not None else pc.tol,
                    max_iter=args.max_iter or pc.max_iter)
    n = args.n or (400 if args.design == "sim1" else 300)
    cfg = BenchConfig(design=args.design, error_family=args.error, omegas=omegas, reps=args.reps, n=n,
                      n_test=args.n_test, p=args.p, heteroscedastic=args.heteroscedastic,
                      folds=args.folds, seed=args.seed, path_config=pc)
    reps = run_bench(cfg)
    write_csv(args.out, mad_table(cfg, reps))
    write_csv(_stem(args.out, ".reps.csv"), rep_rows(cfg, reps))
    # wall-clock times differ run to run, so they live apart from the primary table
    write_csv(_stem(args.out, ".timing.csv"), timing_rows(reps))
    if args.curves:
        write_csv(_stem(args.out, ".curves.csv"), sim1_curves(cfg))
    write_json(_sidecar(args.out), {**_header(args), "config": cfg.to_dict(),
                                    "replication_seeds": [rr.seed for rr in reps]})


COMMANDS = {"fit": cmd_fit, "path": cmd_path, "cv": cmd_cv, "predict": cmd_predict,
            "simulate": cmd_simulate, "bench": cmd_bench}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        validate(args)
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            COMMANDS[args.command](args)
        return 0
    except CLIError as exc:
        err = {"error": exc.kind, "message": str(exc)}
    except DataError as exc:
        err = {"error": "data", "message": str(exc)}
    except (ValueError, RuntimeError, FloatingPointError, OSError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(err), file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
