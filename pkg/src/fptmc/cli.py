"""``fptmc`` command-line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
Every command writes ``manifest.json`` (config echo and seeds, enough to
rerun with ``--config manifest.json``) and ``timing.csv``; the manifest holds
no timings so reruns reproduce it byte for byte.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import os
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .baseline import EulerConfig, euler_simulate, nojump_default_probability
from .calibrate import (
    calibrate_pair,
    calibrate_single_firm,
    model_rates,
    pair_portfolio,
    read_historical_csv,
    single_firm_portfolio,
)
from .config import ConfigError, ExperimentConfig, load_config, validate
from .estimate import correlation_report, default_grid, estimate_firm
from .unif import BLOCK_SIZE, simulate

log = logging.getLogger("fptmc")

# closed-form (A,A) default correlations reported alongside the simulation
ANALYTIC_AA_REFERENCE = {1.0: 0.0, 2.0: 0.0002, 5.0: 0.0165, 10.0: 0.0775}


def fmt(v) -> str:
    v = float(v)
    if np.isnan(v):
        return "nan"
    return format(v, ".12g")


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(r if isinstance(r, str) else fmt(r) for r in row) + "\n")
    return buf.getvalue()


@contextmanager
def timed():
    rec = {}
    w0, c0, t0 = time.perf_counter(), time.process_time(), os.times()
    yield rec
    t1 = os.times()
    children = (t1.children_user - t0.children_user) + (t1.children_system - t0.children_system)
    rec["wall"] = time.perf_counter() - w0
    rec["cpu"] = time.process_time() - c0 + children


def run_engine(cfg: ExperimentConfig, engine: str, portfolio=None):
    portfolio = cfg.portfolio if portfolio is None else portfolio
    with timed() as t:
        if engine == "unif":
            ss = simulate(portfolio, cfg.n_runs, cfg.seed, cfg.workers)
        else:
            ss = euler_simulate(portfolio, EulerConfig(cfg.dt, cfg.n_runs, cfg.seed), cfg.workers)
    return ss, t


def timing_rows(cfg, results):
    """``results``: list of (engine, SampleSet, timer, estimates)."""
    per_run = {e: t["cpu"] / ss.n_runs for e, ss, t, _ in results}
    ref = per_run.get("euler")
    rows = []
    for engine, ss, t, ests in results:
        for name, est in zip(cfg.names, ests):
            speed = ref / per_run[engine] if ref and per_run[engine] > 0 else float("nan")
            rows.append([engine, name, str(ss.n_runs), t["wall"], t["cpu"], per_run[engine],
                         est.density.bandwidth, speed])
    header = ["engine", "firm", "n_runs", "wall_seconds", "cpu_seconds", "cpu_per_run", "bandwidth", "speedup"]
    return csv_text(header, rows)


def manifest(cfg: ExperimentConfig, command: str, engines, outputs, extra=None) -> str:
    doc = {
        "tool": "fptmc",
        "version": __version__,
        "command": command,
        "engines": list(engines),
        "seed": cfg.seed,
        "n_runs": cfg.n_runs,
        "block_size": BLOCK_SIZE,
        "numpy": np.__version__,
        "outputs": sorted(outputs) + ["manifest.json"],
        "config": cfg.echo(),
    }
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def cmd_simulate(cfg: ExperimentConfig, args) -> dict:
    ss, t = run_engine(cfg, cfg.engine)
    grid = default_grid(cfg.portfolio.horizon, cfg.grid_size)
    ests = [estimate_firm(ss, i, grid) for i in range(cfg.portfolio.n_firms)]
    files = {
        "density.csv": csv_text(["t"] + cfg.names, zip(grid, *[e.density.values for e in ests])),
        "rates.csv": csv_text(["t"] + cfg.names, zip(grid, *[e.rates.rates for e in ests])),
        "timing.csv": timing_rows(cfg, [(cfg.engine, ss, t, ests)]),
    }
    for name, e in zip(cfg.names, ests):
        print(f"{name}: P(T)={e.rates.rates[-1]:.5f} default fraction={ss.default_fraction()[cfg.names.index(name)]:.5f} "
              f"h={e.density.bandwidth:.4f}")
    print(f"{cfg.engine}: {t['cpu'] / ss.n_runs:.3e} s CPU per run")
    files["manifest.json"] = manifest(cfg, "simulate", [cfg.engine], files)
    return files


def cmd_correlate(cfg: ExperimentConfig, args) -> dict:
    n = cfg.portfolio.n_firms
    if n < 2:
        raise ConfigError("correlate needs a config with at least two firms")
    ss, t = run_engine(cfg, cfg.engine)
    use_ref = cfg.reference == "analytic_AA"
    header = ["horizon", "pair", "rho", "p_a", "p_b", "p_ab", "stderr"] + (["reference_rho"] if use_ref else [])
    rows = []
    for i in range(n):
        for j in range(i + 1, n):
            rep = correlation_report(ss, i, j, cfg.horizons)
            for k, h in enumerate(cfg.horizons):
                row = [h, f"{cfg.names[i]}-{cfg.names[j]}", rep.rho[k], rep.p_a[k], rep.p_b[k], rep.p_ab[k],
                       rep.stderr[k]]
                if use_ref:
                    row.append(ANALYTIC_AA_REFERENCE.get(float(h), float("nan")))
                rows.append(row)
                print(f"t={h:g} {row[1]}: rho={rep.rho[k] * 100:.2f}% (se {rep.stderr[k] * 100:.2f}%)")
    grid = default_grid(cfg.portfolio.horizon, cfg.grid_size)
    ests = [estimate_firm(ss, i, grid) for i in range(n)]
    files = {
        "correlations.csv": csv_text(header, rows),
        "timing.csv": timing_rows(cfg, [(cfg.engine, ss, t, ests)]),
    }
    files["manifest.json"] = manifest(cfg, "correlate", [cfg.engine], files)
    return files


def _fixed_settings(cfg):
    f = cfg.portfolio.firms[0]
    return dict(x0=f.x0, kappa_log=f.kappa_log, mu=f.mu, gamma=f.gamma,
                interjump_mean=cfg.portfolio.interjump_mean, horizon=cfg.portfolio.horizon)


def cmd_calibrate(cfg: ExperimentConfig, args) -> dict:
    paths = args.historical or []
    if not paths:
        raise ConfigError("calibrate needs --historical")
    curves = []
    for p in paths:
        try:
            curves.append(read_historical_csv(p))
        except OSError as exc:
            raise ConfigError(f"cannot read {p}: {exc.strerror or exc}") from exc
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    opts = cfg.calibration
    sim_runs = int(opts.get("sim_runs", 20_000))
    confirm_runs = int(opts.get("confirm_runs", cfg.n_runs))
    max_evals = int(opts.get("max_evals", 500))
    fixed = _fixed_settings(cfg)
    port = cfg.portfolio
    f0 = port.firms[0]

    with timed() as t:
        if args.mode == "single":
            if len(curves) != 1:
                raise ConfigError("single mode takes exactly one --historical curve")
            init = opts.get("init", [float(port.diffusion.vols[0]), port.lam, f0.jump_mean, max(f0.jump_sd, 1e-3)])
            res = calibrate_single_firm(curves[0], init, cfg.seed, sim_runs, fixed=fixed, max_evals=max_evals,
                                        workers=cfg.workers)
            fitted = single_firm_portfolio(**res.params, fixed=fixed)
            curves_used = curves
        else:
            if port.n_firms != 2:
                raise ConfigError("pair mode needs a two-firm config")
            curves_used = curves * 2 if len(curves) == 1 else curves
            if len(curves_used) != 2:
                raise ConfigError("pair mode takes one or two --historical curves")
            jumps = opts.get("fixed_jumps", [port.lam, f0.jump_mean, f0.jump_sd])
            init = opts.get("init", port.diffusion.entries.ravel().tolist())
            res = calibrate_pair(curves_used, jumps, init, cfg.seed, sim_runs, fixed=fixed, max_evals=max_evals,
                                 uniform_corr=port.uniform_corr, workers=cfg.workers)
            fitted = pair_portfolio(list(res.params.values()), *jumps, fixed=fixed, uniform_corr=port.uniform_corr)
        confirm = model_rates(fitted, curves_used[0].times, confirm_runs, cfg.seed, cfg.workers)

    doc = {
        "mode": args.mode,
        "params": res.params,
        "derived": res.derived,
        "objective_value": res.objective_value,
        "evaluations": res.evaluations,
        "seed": res.seed,
        "sim_runs": sim_runs,
        "confirmation": {
            "n_runs": confirm_runs,
            "firms": [
                {"times": c.times.tolist(), "historical": c.rates.tolist(), "model": m.tolist()}
                for c, m in zip(curves_used, confirm)
            ],
        },
        "trace": res.trace,
    }
    print(json.dumps({"params": res.params, "derived": res.derived, "objective": res.objective_value}, indent=2))
    files = {
        "calibration.json": json.dumps(doc, indent=2) + "\n",
        "timing.csv": csv_text(["command", "wall_seconds", "cpu_seconds", "evaluations"],
                               [["calibrate", t["wall"], t["cpu"], res.evaluations]]),
    }
    files["manifest.json"] = manifest(cfg, "calibrate", ["unif"], files,
                                      {"mode": args.mode, "historical": [Path(p).name for p in paths]})
    return files


def cmd_compare(cfg: ExperimentConfig, args) -> dict:
    grid = default_grid(cfg.portfolio.horizon, cfg.grid_size)
    results = []
    for engine in ("unif", "euler"):
        ss, t = run_engine(cfg, engine)
        ests = [estimate_firm(ss, i, grid) for i in range(cfg.portfolio.n_firms)]
        results.append((engine, ss, t, ests))
    rows = []
    for engine, _, _, ests in results:
        for name, e in zip(cfg.names, ests):
            rows += [[engine, name, g, v] for g, v in zip(grid, e.rates.rates)]
    for i, (name, f) in enumerate(zip(cfg.names, cfg.portfolio.firms)):
        z = f.distance / cfg.portfolio.diffusion.vols[i]
        rows += [["closed_form", name, g, v] for g, v in zip(grid, nojump_default_probability(z, grid))]
    for i, name in enumerate(cfg.names):
        gap = np.max(np.abs(results[0][3][i].rates.rates - results[1][3][i].rates.rates))
        print(f"{name}: max |unif - euler| = {gap * 100:.3f} pp")
    timing = timing_rows(cfg, results)
    print(timing, end="")
    files = {"compare.csv": csv_text(["engine", "firm", "t", "value"], rows), "timing.csv": timing}
    files["manifest.json"] = manifest(cfg, "compare", ["unif", "euler"], files)
    return files


COMMANDS = {
    "simulate": cmd_simulate,
    "correlate": cmd_correlate,
    "calibrate": cmd_calibrate,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fptmc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fptmc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML config or a previous manifest.json")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--engine", choices=["unif", "euler"])
        p.add_argument("--runs", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        if name == "correlate":
            p.add_argument("--horizons", help="comma-separated horizons, e.g. 1,2,5,10")
        if name == "calibrate":
            p.add_argument("--historical", action="append", help="t,rate CSV (repeat for pair mode)")
            p.add_argument("--mode", choices=["single", "pair"], default="single")
    return parser


def apply_overrides(cfg: ExperimentConfig, args):
    if args.engine:
        cfg.engine = args.engine
    if args.runs is not None:
        cfg.n_runs = args.runs
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    if getattr(args, "horizons", None):
        try:
            cfg.horizons = [float(h) for h in args.horizons.split(",")]
        except ValueError as exc:
            raise ConfigError(f"bad --horizons: {args.horizons}") from exc
    validate(cfg)


def write_outputs(out, files: dict):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        tmp = out / (name + ".tmp")
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, out / name)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="fptmc: %(levelname)s: %(message)s")
    try:
        cfg = load_config(args.config)
        apply_overrides(cfg, args)
        files = COMMANDS[args.command](cfg, args)
        write_outputs(args.out, files)
    except ConfigError as exc:
        print(f"fptmc: configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"fptmc: I/O error: {exc}", file=sys.stderr)
        return 4
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"fptmc: numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
