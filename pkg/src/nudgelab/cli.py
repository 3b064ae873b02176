"""Command-line entry point.

Subcommands:
  run    <config> [--out DIR] [--full]      twin experiment(s), CSV/JSON artifacts
  sweep  <config> --param P --values ...    parameter sweep, sweep.csv
  check  <config>                           advisory convergence-condition report
  rate   <errors.csv>                       rate fit of an error-series CSV

Configs are JSON files or canned names (see `nudgelab run --list`). Exit
codes: 0 success, 2 invalid config or arguments, 3 solver failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import datetime
import io
import json
import os
import sys
import time
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .analysis import (
    ErrorSeries,
    RateFit,
    build_sweep,
    fit_rate,
    rate_fit_to_dict,
    sweep_to_csv,
)
from .assimilation import check_condition, estimate_lipschitz, run_twin_joint
from .config import (
    SWEEP_PARAMS,
    BuiltExperiment,
    ConfigError,
    build_experiment,
    canned_names,
    load_config,
)
from .grids import Field, Grid2D
from .interpolation import estimate_interp_constant, kappa_alignment, network_to_json
from .models import NavierStokes2D, initial_condition
from .rk45 import StiffnessError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_atomic(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _emit_error_series_csv(scheme_names, results) -> str:
    buf = io.StringIO()
    header = "time," + ",".join(f"error_{name}" for name in scheme_names)
    buf.write(header + "\n")
    times = results[0].times
    n = min(len(r.times) for r in results)
    for i in range(n):
        row = [_fmt(times[i])] + [_fmt(r.errors[i]) for r in results]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def _snapshot_files(out_dir: str, name: str, result, grid) -> List[str]:
    files = []
    if isinstance(grid, Grid2D):
        meta = {
            "grid": {"nx": grid.nx, "ny": grid.ny, "lx": grid.lx, "ly": grid.ly},
            "order": "row-major (x index outer, y index inner)",
            "times": [float(t) for t in result.snapshot_times],
            "files": {},
        }
        for which, snaps in (
            ("reference", result.reference_snapshots),
            (name, result.assimilated_snapshots),
        ):
            for idx, fld in enumerate(snaps):
                fname = f"snapshot_{which}_{idx:03d}.csv"
                lines = "\n".join(_fmt(v) for v in fld.values.ravel()) + "\n"
                _write_atomic(os.path.join(out_dir, fname), lines)
                meta["files"].setdefault(which, []).append(fname)
                files.append(fname)
        meta_name = f"snapshots_{name}.json"
        _write_atomic(os.path.join(out_dir, meta_name), json.dumps(meta, indent=2))
        files.append(meta_name)
    else:
        fname = f"snapshots_{name}.csv"
        buf = io.StringIO()
        x = result.reference_snapshots[0].grid.nodes()
        cols = ["x"]
        for t in result.snapshot_times:
            cols += [f"reference_t{t:g}", f"{name}_t{t:g}"]
        buf.write(",".join(cols) + "\n")
        for i in range(x.size):
            row = [_fmt(x[i])]
            for k in range(len(result.snapshot_times)):
                row.append(_fmt(result.reference_snapshots[k].values[i]))
                row.append(_fmt(result.assimilated_snapshots[k].values[i]))
            buf.write(",".join(row) + "\n")
        _write_atomic(os.path.join(out_dir, fname), buf.getvalue())
        files.append(fname)
    return files


def _run_built(exp: BuiltExperiment):
    return run_twin_joint(
        exp.model, exp.schemes, exp.network, exp.grid,
        exp.t_end, exp.output_dt, exp.tolerances, exp.disc, exp.snapshot_dt,
    )


def cmd_run(config_path: str, out_dir: Optional[str], full: bool) -> int:
    try:
        raw = load_config(config_path)
        exp = build_experiment(raw, full=full)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = out_dir or exp.name
    os.makedirs(out_dir, exist_ok=True)
    started = datetime.datetime.now(datetime.timezone.utc)
    t0 = time.perf_counter()
    try:
        results = _run_built(exp)
    except StiffnessError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    wall = time.perf_counter() - t0

    files = ["error_series.csv", "ratefit.json"]
    _write_atomic(
        os.path.join(out_dir, "error_series.csv"),
        _emit_error_series_csv(exp.scheme_names, results),
    )
    fits: Dict[str, dict] = {}
    for name, res in zip(exp.scheme_names, results):
        entry: Dict[str, object] = {"run_status": res.status}
        try:
            fit = fit_rate(ErrorSeries(res.times, res.errors), exp.rate_policy)
            entry.update(rate_fit_to_dict(fit))
        except ValueError as exc:
            entry["error"] = str(exc)
        fits[name] = entry
        files += _snapshot_files(out_dir, name, res, exp.grid)
    _write_atomic(os.path.join(out_dir, "ratefit.json"), json.dumps(fits, indent=2))

    manifest = {
        "config": exp.raw,
        "code_version": __version__,
        "started": started.isoformat(),
        "finished": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "wall_time_seconds": wall,
        "runs": {
            name: {"status": res.status, "wall_time_seconds": res.wall_time}
            for name, res in zip(exp.scheme_names, results)
        },
        "files": sorted(set(files)) + ["manifest.json"],
    }
    _write_atomic(os.path.join(out_dir, "manifest.json"), json.dumps(manifest, indent=2))

    for name, entry in fits.items():
        gamma = entry.get("gamma")
        status = entry.get("status", entry.get("run_status"))
        gtxt = "nan" if gamma is None else f"{gamma:.4f}"
        print(f"{exp.name} {name}: gamma={gtxt} status={status}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweeps


def _apply_sweep_value(raw: dict, param: str, value: float) -> dict:
    cfg = json.loads(json.dumps(raw))  # deep copy
    net = cfg.get("network", {})
    if param == "Ns":
        ns = int(round(value))
        for key in ("points", "equispaced", "halton"):
            net.pop(key, None)
        if cfg.get("model", {}).get("kind") == "navier_stokes_2d":
            net["halton"] = ns
        else:
            net["equispaced"] = ns
    elif param == "lambda":
        for s in cfg.get("schemes", []):
            s["lambda"] = value
    elif param == "rho":
        net["rho"] = value
    elif param == "eta_k":
        for s in cfg.get("schemes", []):
            s["eta_k"] = value
    else:
        raise ValueError(f"unknown sweep parameter {param!r}")
    cfg["network"] = net
    return cfg


def _sweep_one(args):
    raw, param, value, full = args
    cfg = _apply_sweep_value(raw, param, value)
    exp = build_experiment(cfg, full=full)
    entries = []
    try:
        results = _run_built(exp)
    except StiffnessError:
        return [(value, name, None, "stiff") for name in exp.scheme_names]
    for name, res in zip(exp.scheme_names, results):
        if res.status != "ok":
            entries.append((value, name, None, res.status))
            continue
        try:
            fit = fit_rate(ErrorSeries(res.times, res.errors), exp.rate_policy)
        except ValueError:
            entries.append((value, name, None, "no-exponential-window"))
            continue
        entries.append((value, name, fit, "ok"))
    return entries


def _worker_count(requested: Optional[int]) -> int:
    env = os.environ.get("NUDGE_LAB_THREADS")
    if requested is not None:
        return max(1, requested)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def cmd_sweep(config_path: str, param: str, values: Sequence[float],
              workers: Optional[int], out_dir: Optional[str], full: bool) -> int:
    if param not in SWEEP_PARAMS:
        print(f"sweep error: --param must be one of {SWEEP_PARAMS}", file=sys.stderr)
        return EXIT_CONFIG
    if not values:
        print("sweep error: --values is empty", file=sys.stderr)
        return EXIT_CONFIG
    try:
        raw = load_config(config_path)
        base = build_experiment(raw, full=full)
        for v in values:
            build_experiment(_apply_sweep_value(raw, param, v), full=full)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = out_dir or f"{base.name}_sweep_{param}"
    os.makedirs(out_dir, exist_ok=True)
    n_workers = min(_worker_count(workers), len(values))
    jobs = [(raw, param, v, full) for v in values]
    started = datetime.datetime.now(datetime.timezone.utc)
    entries = []
    if n_workers <= 1:
        for job in jobs:
            entries.extend(_sweep_one(job))
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=n_workers) as pool:
            for result in pool.map(_sweep_one, jobs):
                entries.extend(result)

    table = build_sweep(param, entries)
    _write_atomic(os.path.join(out_dir, "sweep.csv"), sweep_to_csv(table))
    manifest = {
        "config": raw,
        "param": param,
        "values": list(map(float, values)),
        "code_version": __version__,
        "started": started.isoformat(),
        "finished": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "files": ["sweep.csv", "manifest.json"],
        "row_statuses": {f"{r.param_value:g}/{r.scheme}": r.status for r in table.rows},
    }
    _write_atomic(os.path.join(out_dir, "manifest.json"), json.dumps(manifest, indent=2))
    print(sweep_to_csv(table), end="")
    ok_rows = sum(1 for r in table.rows if r.status == "ok")
    return EXIT_OK if ok_rows >= 1 else EXIT_SOLVER


# ---------------------------------------------------------------------------
# condition check


def cmd_check(config_path: str, full: bool) -> int:
    try:
        raw = load_config(config_path)
        exp = build_experiment(raw, full=full)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG

    u0 = initial_condition(exp.model, "reference", exp.grid)
    probes = [u0] + [
        Field(exp.grid, factor * u0.values) for factor in (0.9, 0.75, 0.5)
    ]
    l_est = estimate_lipschitz(exp.model, probes)
    h = exp.network.h
    c_est = estimate_interp_constant(
        exp.network.method,
        exp.network.domain if exp.network.ndim == 2 else exp.network.domain,
        [h, h / 2],
    )
    mu = getattr(exp.model, "mu", 1.0)
    for name, scheme in zip(exp.scheme_names, exp.schemes):
        kappa = 1.0
        if scheme.eta > 0:
            kappa = max(1e-6, min(1.0, kappa_alignment(u0, exp.network)))
        report = check_condition(
            scheme.kind, L=l_est, C=c_est, h=h, mu=mu,
            eta=scheme.eta, kappa=kappa, alpha=0.5, lam=scheme.lam,
        )
        flag = "within sufficient window" if report.feasible else \
            "outside sufficient window; experiment proceeds"
        print(json.dumps({
            "scheme": name,
            "lambda": scheme.lam,
            "lambda_lower": report.lambda_lower,
            "lambda_upper": report.lambda_upper,
            "feasible": report.feasible,
            "gamma_predicted": report.gamma_predicted,
            "inputs": report.inputs,
            "note": flag,
        }))
    return EXIT_OK


# ---------------------------------------------------------------------------
# rate fit of a CSV


def cmd_rate(csv_path: str, policy: str, t_lo: Optional[float],
             t_hi: Optional[float]) -> int:
    try:
        with open(csv_path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        if len(header) < 2 or header[0] != "time" or data.shape[1] != len(header):
            raise ValueError("expected a header starting with 'time' and one "
                             "or more error columns")
        times = data[:, 0]
        fits = {}
        window = (t_lo, t_hi) if policy == "window" else "auto"
        for j, col in enumerate(header[1:], start=1):
            series = ErrorSeries(times, data[:, j])
            fits[col] = rate_fit_to_dict(fit_rate(series, window))
    except (OSError, ValueError) as exc:
        print(f"rate error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(fits, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="nudgelab",
        description="Twin-experiment laboratory for interpolation-based "
                    "continuous data assimilation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a twin experiment config")
    p_run.add_argument("config", help="JSON config path or canned name")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--full", action="store_true",
                       help="use the full-size (non-desk) variant")
    p_run.add_argument("--list", action="store_true", help="list canned configs")

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated parameter values")
    p_sweep.add_argument("--workers", type=int, default=None,
                         help="parallel workers (default: NUDGE_LAB_THREADS "
                              "or logical CPUs)")
    p_sweep.add_argument("--out", default=None)
    p_sweep.add_argument("--full", action="store_true")

    p_check = sub.add_parser("check", help="print the convergence-condition report")
    p_check.add_argument("config")
    p_check.add_argument("--full", action="store_true")

    p_rate = sub.add_parser("rate", help="fit decay rates from an error CSV")
    p_rate.add_argument("csv")
    p_rate.add_argument("--policy", choices=["auto", "window"], default="auto")
    p_rate.add_argument("--t-lo", type=float, default=None)
    p_rate.add_argument("--t-hi", type=float, default=None)

    args = parser.parse_args(argv)

    if args.command == "run":
        if args.list:
            for name in canned_names():
                print(name)
            return EXIT_OK
        return cmd_run(args.config, args.out, args.full)
    if args.command == "sweep":
        try:
            values = [float(v) for v in args.values.split(",") if v.strip()]
        except ValueError:
            print("sweep error: --values must be comma-separated numbers",
                  file=sys.stderr)
            return EXIT_CONFIG
        return cmd_sweep(args.config, args.param, values, args.workers,
                         args.out, args.full)
    if args.command == "check":
        return cmd_check(args.config, args.full)
    return cmd_rate(args.csv, args.policy, args.t_lo, args.t_hi)


if __name__ == "__main__":
    sys.exit(main())
