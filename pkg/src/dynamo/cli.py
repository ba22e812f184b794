"""Command-line interface: ``dynamo <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data or validation error,
3 solver non-convergence when ``--strict`` is given.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .bandwidth import CVConfig, select_bandwidth
from .benchmark import BenchmarkSpec, replicate_seeds, run_benchmark
from .data import DataError, build_lagged, home_away_difference, load_csv, load_events, save_csv
from .kernel import FAMILIES, KernelSpec
from .linear import FitResult, SolverConfig, fit_at, fit_path, threshold
from .metrics import evaluate_graphs, predict_mse
from .nonlinear import NonlinearFitResult, fit_at_nonlinear
from .simulate import generate, make_process

log = logging.getLogger("dynamo")

MANIFEST_SCHEMA = 1
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NONCONVERGED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def parse_index_list(text: str) -> list[int]:
    """``1,30,60,90`` or inclusive ranges ``10:90:10`` (mixable with commas)."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            bits = [int(b) for b in part.split(":")]
            if len(bits) == 2:
                bits.append(1)
            start, stop, step = bits
            if step <= 0:
                raise argparse.ArgumentTypeError(f"bad range {part!r}")
            out.extend(range(start, stop + 1, step))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def parse_float_list(text: str) -> list[float]:
    """``0.3,0.9`` or inclusive ranges ``0.1:0.9:0.1``."""
    out: list[float] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            start, stop, step = (float(b) for b in part.split(":"))
            if step <= 0:
                raise argparse.ArgumentTypeError(f"bad range {part!r}")
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            out.extend(round(start + k * step, 10) for k in range(n))
        else:
            out.append(float(part))
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("DYNAMO_JOBS", "1")))
    except ValueError:
        return 1


def _write_json(path: str | Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def write_manifest(out_path: str | Path, subcommand: str, config: dict, inputs: dict, outputs: dict,
                   seed=None) -> Path:
    path = Path(str(out_path) + ".manifest.json")
    _write_json(path, {
        "schema_version": MANIFEST_SCHEMA,
        "tool": "dynamo",
        "version": __version__,
        "subcommand": subcommand,
        "seed": seed,
        "config": config,
        "inputs": inputs,
        "outputs": outputs,
    })
    return path


def _solver_from_args(args) -> SolverConfig:
    if args.model == "nonlinear":
        base = SolverConfig.nonlinear(seed=args.seed)
    elif args.profile == "simulation":
        base = SolverConfig.simulation()
    else:
        base = SolverConfig.real_data()
    overrides = {}
    for name in ("lambda1", "lambda2", "eta_tol", "rho_max", "max_outer"):
        v = getattr(args, name, None)
        if v is not None:
            overrides[name] = v
    if args.model == "nonlinear":
        overrides["hidden_units"] = args.hidden_units
    return replace(base, **overrides)


def _add_solver_args(p):
    p.add_argument("--model", choices=("linear", "nonlinear"), default="linear")
    p.add_argument("--profile", choices=("real", "simulation"), default="real",
                   help="linear defaults: eta_tol 1e-5 (real) or 1e-3 (simulation)")
    p.add_argument("--lambda1", type=float, help="instantaneous sparsity penalty")
    p.add_argument("--lambda2", type=float, help="lagged sparsity penalty")
    p.add_argument("--eta-tol", dest="eta_tol", type=float)
    p.add_argument("--rho-max", dest="rho_max", type=float)
    p.add_argument("--max-outer", dest="max_outer", type=int)
    p.add_argument("--hidden-units", dest="hidden_units", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)


def _add_input_args(p):
    p.add_argument("--input", required=True, help="CSV, one row per time point")
    p.add_argument("--no-header", dest="header", action="store_false")
    p.add_argument("--lag", type=int, default=1)


def _fit_one(t, lagged, kernel, solver, model):
    return fit_at_nonlinear(t, lagged, kernel, solver) if model == "nonlinear" else fit_at(t, lagged, kernel, solver)


def cmd_simulate(args) -> int:
    gt = make_process(d=args.d, T=args.T, L=args.lag, mode=args.mode, noise=args.noise, seed=args.seed,
                      gamma=args.gamma, phi=args.phi, speed=args.speed)
    series, graphs = generate(gt)
    save_csv(series, args.out)
    truth = {
        "process": gt.to_dict(),
        "graphs": [{"t": t, "W": W.tolist(), "A": A.tolist()} for t, (W, A) in enumerate(graphs, start=1)],
    }
    _write_json(args.truth, truth)
    write_manifest(args.out, "simulate", gt.to_dict() | {"speed": args.speed}, {},
                   {"data": str(args.out), "truth": str(args.truth)}, seed=args.seed)
    return EXIT_OK


def _resolve_bandwidths(args, times, lagged, solver) -> dict[int, float]:
    if args.bandwidth != "cv":
        h = float(args.bandwidth)
        return {t: h for t in times}
    cv = CVConfig(grid=tuple(args.grid), K=args.folds, seed=args.seed, family=args.kernel,
                  test_weighting=args.test_weighting)
    linear_solver = solver if args.model == "linear" else SolverConfig.real_data()
    return {t: select_bandwidth(t, lagged, cv, linear_solver).bandwidth for t in times}


def cmd_fit(args) -> int:
    series = load_csv(args.input, args.header)
    lagged = build_lagged(series, args.lag)
    solver = _solver_from_args(args)
    times = args.t
    bandwidths = _resolve_bandwidths(args, times, lagged, solver)
    results = []
    if len(set(bandwidths.values())) == 1 and args.model == "linear":
        kernel = KernelSpec(args.kernel, next(iter(bandwidths.values())))
        results = fit_path(times, lagged, kernel, solver, jobs=args.jobs)
    else:
        for t in times:
            results.append(_fit_one(t, lagged, KernelSpec(args.kernel, bandwidths[t]), solver, args.model))
    fits = []
    for res in results:
        entry = res.to_dict()
        if isinstance(res, FitResult):
            thr = threshold(res.params, args.threshold)
            entry["W_raw"], entry["A_raw"] = entry["W"], entry["A"]
            entry["W"], entry["A"] = thr.W.tolist(), thr.A.tolist()
        else:
            entry["W_raw"], entry["A_raw"] = entry["W"], entry["A"]
            entry["W"] = np.where(res.W_derived < args.threshold, 0.0, res.W_derived).tolist()
            entry["A"] = np.where(res.A_derived < args.threshold, 0.0, res.A_derived).tolist()
        fits.append(entry)
    config = {"model": args.model, "kernel": args.kernel, "bandwidth": args.bandwidth,
              "lag": args.lag, "threshold": args.threshold, "solver": solver.to_dict(),
              "times": times}
    _write_json(args.out, {"variable_names": list(series.variable_names), "lag": args.lag,
                           "threshold": args.threshold, "fits": fits})
    write_manifest(args.out, "fit", config, {"input": str(args.input)}, {"fits": str(args.out)}, seed=args.seed)
    not_converged = [r.t for r in results if not r.converged]
    if not_converged:
        log.warning("fits did not reach eta_tol at t=%s", not_converged)
        if args.strict:
            return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_cv(args) -> int:
    series = load_csv(args.input, args.header)
    lagged = build_lagged(series, args.lag)
    solver = _solver_from_args(args)
    cv = CVConfig(grid=tuple(args.grid), K=args.folds, seed=args.seed, model=args.model,
                  family=args.kernel, test_weighting=args.test_weighting)
    results = [select_bandwidth(t, lagged, cv, solver).to_dict() for t in args.t]
    _write_json(args.out, {"grid": list(cv.grid), "folds": cv.K, "seed": cv.seed, "results": results})
    write_manifest(args.out, "cv", {"grid": list(cv.grid), "folds": cv.K, "model": cv.model,
                                    "kernel": cv.family, "test_weighting": cv.test_weighting,
                                    "lag": args.lag, "solver": solver.to_dict(), "times": args.t},
                   {"input": str(args.input)}, {"cv": str(args.out)}, seed=args.seed)
    return EXIT_OK


def _load_fit(entry: dict):
    if entry.get("model") == "nonlinear":
        return NonlinearFitResult.from_dict(entry)
    return FitResult.from_dict(entry)


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from None


def cmd_eval(args) -> int:
    est = _read_json(args.est)
    truth = _read_json(args.truth)
    graphs = {int(g["t"]): g for g in truth["graphs"]}
    per_t = []
    for entry in est["fits"]:
        t = int(entry["t"])
        if t not in graphs:
            raise DataError(f"truth has no graph for t={t}")
        reports = evaluate_graphs(entry["W"], entry["A"], graphs[t]["W"], graphs[t]["A"], args.threshold)
        per_t.append({"t": t, **{k: v.to_dict() for k, v in reports.items()}})
    summary = {}
    for comp in ("instantaneous", "lagged"):
        summary[comp] = {m: float(np.mean([r[comp][m] for r in per_t]))
                         for m in ("shd", "precision", "recall", "f1")}
    _write_json(args.out, {"threshold": args.threshold, "per_t": per_t, "mean": summary})
    write_manifest(args.out, "eval", {"threshold": args.threshold},
                   {"est": str(args.est), "truth": str(args.truth)}, {"report": str(args.out)})
    return EXIT_OK


def cmd_predict(args) -> int:
    est = _read_json(args.fits)
    series = load_csv(args.input, args.header)
    lagged = build_lagged(series, int(est.get("lag", 1)))
    fits = [_load_fit(e) for e in est["fits"]]
    target = series.index_of(args.target)
    mse = predict_mse(fits, lagged, target)
    _write_json(args.out, {"target": args.target, "times": [f.t for f in fits], "mse": mse})
    write_manifest(args.out, "predict", {"target": args.target},
                   {"fits": str(args.fits), "input": str(args.input)}, {"mse": str(args.out)})
    return EXIT_OK


def cmd_ingest(args) -> int:
    events = load_events(args.events, bin_added_time=args.bin_added_time)
    series = home_away_difference(events, args.team, strict=args.strict)
    save_csv(series, args.out)
    write_manifest(args.out, "ingest", {"team": args.team, "strict": args.strict,
                                        "bin_added_time": args.bin_added_time},
                   {"events": str(args.events)}, {"series": str(args.out)})
    return EXIT_OK


def cmd_benchmark(args) -> int:
    seeds = args.seed_list if args.seed_list else replicate_seeds(args.seeds, args.master_seed)
    nl_bw = "cv" if args.nonlinear_bandwidth == "cv" else float(args.nonlinear_bandwidth)
    spec = BenchmarkSpec(d=tuple(args.d), T=args.T, times=tuple(args.t), seeds=tuple(seeds), L=args.lag,
                         mode=args.mode, noise=args.noise, speed=args.speed,
                         models=tuple(args.models.split(",")), threshold=args.threshold,
                         grid=tuple(args.grid), folds=args.folds, test_weighting=args.test_weighting,
                         nonlinear_bandwidth=nl_bw)
    report = run_benchmark(spec, jobs=args.jobs)
    report.write(args.out, args.summary)
    cfg = spec.to_dict()
    write_manifest(args.out, "benchmark", cfg, {},
                   {"rows": str(args.out), "summary": str(args.summary) if args.summary else None},
                   seed=list(seeds))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dynamo", description="Time-varying causal structure learning")
    parser.add_argument("--version", action="version", version=f"dynamo {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate", help="generate a synthetic series with known graphs")
    p.add_argument("--d", type=int, default=5)
    p.add_argument("--T", type=int, default=500)
    p.add_argument("--lag", type=int, default=1)
    p.add_argument("--mode", choices=("linear", "nonlinear"), default="linear")
    p.add_argument("--noise", choices=("gaussian", "uniform"), default="gaussian")
    p.add_argument("--speed", choices=("default", "fast"), default="default")
    p.add_argument("--gamma", type=float, default=0.05)
    p.add_argument("--phi", type=float, default=None, help="changing speed; default from --speed")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--truth", required=True)
    p.set_defaults(func=cmd_simulate)

    def add_kernel_args(p, default_bw):
        p.add_argument("--kernel", choices=FAMILIES, default="epanechnikov")
        p.add_argument("--bandwidth", default=default_bw, help="h, or 'cv' to select per t")
        p.add_argument("--grid", type=parse_float_list, default=parse_float_list("0.1:0.9:0.1"))
        p.add_argument("--folds", type=int, default=5)
        p.add_argument("--test-weighting", dest="test_weighting", choices=("kernel", "none"),
                       default="kernel", help="weight held-out CV losses by the kernel at t")

    p = sub.add_parser("fit", help="local fits at chosen time points")
    _add_input_args(p)
    p.add_argument("--t", type=parse_index_list, required=True, help="e.g. 1,30,60,90 or 10:90:10")
    add_kernel_args(p, "0.5")
    _add_solver_args(p)
    p.add_argument("--threshold", type=float, default=0.05)
    p.add_argument("--jobs", type=int, default=_default_jobs())
    p.add_argument("--strict", action="store_true", help="exit 3 when a fit misses eta_tol")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("cv", help="cross-validated bandwidth per time point")
    _add_input_args(p)
    p.add_argument("--t", type=parse_index_list, required=True)
    add_kernel_args(p, "cv")
    _add_solver_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("eval", help="SHD / F1 of fits against simulated truth")
    p.add_argument("--est", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--threshold", type=float, default=0.05)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="one-step prediction MSE of a target variable")
    p.add_argument("--fits", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--no-header", dest="header", action="store_false")
    p.add_argument("--target", required=True, help="variable name")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("ingest", help="home-minus-away per-minute series from an event CSV")
    p.add_argument("--events", required=True)
    p.add_argument("--team", required=True)
    p.add_argument("--strict", action="store_true", help="error on missing minutes instead of zero-filling")
    p.add_argument("--bin-added-time", dest="bin_added_time", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("benchmark", help="replicated recovery benchmark, CSV output")
    p.add_argument("--d", type=parse_index_list, default=[5])
    p.add_argument("--T", type=int, default=500)
    p.add_argument("--t", type=parse_index_list, default=[60])
    p.add_argument("--seeds", type=int, default=20, help="number of replicates")
    p.add_argument("--master-seed", dest="master_seed", type=int, default=24)
    p.add_argument("--seed-list", dest="seed_list", type=parse_index_list, default=None)
    p.add_argument("--lag", type=int, default=1)
    p.add_argument("--mode", choices=("linear", "nonlinear"), default="linear")
    p.add_argument("--noise", choices=("gaussian", "uniform"), default="gaussian")
    p.add_argument("--speed", choices=("default", "fast"), default="default")
    p.add_argument("--models", default="linear,nonlinear,stationary")
    p.add_argument("--threshold", type=float, default=0.05)
    p.add_argument("--grid", type=parse_float_list, default=parse_float_list("0.1:0.9:0.1"))
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--test-weighting", dest="test_weighting", choices=("kernel", "none"), default="kernel")
    p.add_argument("--nonlinear-bandwidth", dest="nonlinear_bandwidth", default="cv")
    p.add_argument("--jobs", type=int, default=_default_jobs())
    p.add_argument("--out", required=True, help="per-replicate rows CSV")
    p.add_argument("--summary", help="median/IQR summary CSV")
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DataError, ValueError, KeyError, OSError) as exc:
        print(f"dynamo {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
