"""Calibrate jump-diffusion parameters to historical cumulative default rates.

The loss is ``sum_i sqrt(sum_j ((P_i(t_j) - A_i(t_j)) / t_j)^2)`` with model
rates ``P_i`` from a UNIF run at a fixed seed (common random numbers), which
makes it a deterministic function of the parameters. It is minimized with a
box-constrained Nelder-Mead simplex.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize as _scipy_minimize

from .estimate import estimate_firm
from .model import DiffusionMatrix, FirmSpec, PortfolioSpec, diffusion_correlation, effective_vol
from .unif import simulate

log = logging.getLogger(__name__)

# fixed settings of the single-firm and pair experiments
FIXED = dict(x0=2.0, kappa_log=0.0, mu=-0.001, gamma=-0.001, interjump_mean=1.0, horizon=10.0)

SINGLE_NAMES = ("sigma", "lam", "jump_mean", "jump_sd")
PAIR_NAMES = ("s11", "s12", "s21", "s22")
SIGMA_BOUNDS = (1e-4, 1.0)
SINGLE_BOUNDS = (SIGMA_BOUNDS, (0.0, 1.0), (-2.0, 2.0), (1e-3, 2.0))
PAIR_BOUNDS = (SIGMA_BOUNDS,) * 4


@dataclass(frozen=True)
class HistoricalCurve:
    times: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        r = np.asarray(self.rates, dtype=float)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "rates", r)
        if t.ndim != 1 or t.size == 0 or t.shape != r.shape:
            raise ValueError("historical curve needs matching, nonempty times and rates")
        if np.any(t <= 0) or np.any(np.diff(t) <= 0):
            raise ValueError("historical times must be positive and strictly increasing")
        if np.any((r < 0) | (r > 1)) or not np.all(np.isfinite(r)):
            raise ValueError("historical rates must lie in [0, 1]")
        if np.any(np.diff(r) < 0):
            log.warning("historical rates decrease somewhere; keeping them as given")


def read_historical_csv(path) -> HistoricalCurve:
    """Read a ``t,rate`` CSV. Errors name the offending line."""
    times, rates = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "rate"]:
            raise ValueError(f"{path}:1: expected header 't,rate'")
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{line}: expected 2 fields, got {len(row)}")
            try:
                t, r = float(row[0]), float(row[1])
            except ValueError:
                raise ValueError(f"{path}:{line}: cannot parse {row!r} as numbers") from None
            times.append(t)
            rates.append(r)
    try:
        return HistoricalCurve(np.array(times), np.array(rates))
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def write_historical_csv(curve, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("t,rate\n")
        for t, r in zip(curve.times, curve.rates):
            fh.write(f"{float(t)!r},{float(r)!r}\n")


def calibration_loss(model_rates: Sequence[np.ndarray], historical: Sequence[HistoricalCurve]) -> float:
    """Sum over firms of the root-sum-square of per-year rate mismatches."""
    total = 0.0
    for p, h in zip(model_rates, historical, strict=True):
        r = (np.asarray(p, dtype=float) - h.rates) / h.times
        total += math.sqrt(float(r @ r))
    return total


def model_rates(portfolio: PortfolioSpec, times, sim_runs: int, seed: int, workers: int = 1):
    """Per-firm cumulative rates at ``times`` from a UNIF run and KDE."""
    ss = simulate(portfolio, sim_runs, seed, workers)
    return [estimate_firm(ss, i).rates.at(times) for i in range(portfolio.n_firms)]


def objective(portfolio: PortfolioSpec, historical: Sequence[HistoricalCurve], sim_runs: int,
              seed: int, workers: int = 1) -> float:
    if len(historical) != portfolio.n_firms:
        raise ValueError("need one historical curve per firm")
    rates = [
        estimate_firm(ss, i).rates.at(h.times)
        for ss in [simulate(portfolio, sim_runs, seed, workers)]
        for i, h in enumerate(historical)
    ]
    return calibration_loss(rates, historical)


def single_firm_portfolio(sigma, lam, jump_mean, jump_sd, fixed=FIXED) -> PortfolioSpec:
    firm = FirmSpec(fixed["x0"], fixed["mu"], fixed["kappa_log"], fixed["gamma"], jump_mean, jump_sd)
    return PortfolioSpec((firm,), DiffusionMatrix([[sigma]]), lam, fixed["interjump_mean"], fixed["horizon"])


def pair_portfolio(entries, lam, jump_mean, jump_sd, fixed=FIXED, uniform_corr=None) -> PortfolioSpec:
    firm = FirmSpec(fixed["x0"], fixed["mu"], fixed["kappa_log"], fixed["gamma"], jump_mean, jump_sd)
    m = np.asarray(entries, dtype=float).reshape(2, 2)
    return PortfolioSpec((firm, firm), DiffusionMatrix(m), lam, fixed["interjump_mean"], fixed["horizon"],
                         uniform_corr)


def _check_bounds(x, bounds, names):
    for v, (lo, hi), name in zip(x, bounds, names):
        if not lo <= v <= hi:
            raise ValueError(f"{name}={v} outside [{lo}, {hi}]")


@dataclass
class CalibrationResult:
    params: dict
    objective_value: float
    evaluations: int
    seed: int
    trace: list = field(default_factory=list)
    derived: dict = field(default_factory=dict)


@dataclass
class MinimizeResult:
    x: np.ndarray
    fun: float
    evaluations: int
    trace: list


def _initial_simplex(x0, lo, hi):
    n = x0.size
    sim = np.tile(x0, (n + 1, 1))
    for i in range(n):
        step = 0.05 * abs(x0[i]) if x0[i] != 0 else 0.00025
        step = max(step, 1e-4 * (hi[i] - lo[i]) if np.isfinite(hi[i] - lo[i]) else 0.0)
        if x0[i] + step > hi[i]:
            step = -step
        sim[i + 1, i] = x0[i] + step
    return sim


def minimize(loss: Callable, x0, bounds, max_evals: int = 500, xtol: float = 1e-5) -> MinimizeResult:
    """Nelder-Mead with box projection.

    Stops once every vertex is within ``xtol`` of the best one or after
    ``max_evals`` loss evaluations. Coordinates whose bounds coincide are held
    fixed and removed from the simplex.
    """
    x0 = np.asarray(x0, dtype=float)
    lo = np.array([b[0] for b in bounds], dtype=float)
    hi = np.array([b[1] for b in bounds], dtype=float)
    if np.any(x0 < lo) or np.any(x0 > hi):
        raise ValueError("x0 outside bounds")
    free = lo < hi
    trace = []

    def full(y):
        x = x0.copy()
        x[free] = np.clip(y, lo[free], hi[free])
        return x

    def wrapped(y):
        x = full(y)
        f = float(loss(x))
        if not np.isfinite(f):
            f = np.inf
        best = min(f, trace[-1][2]) if trace else f
        trace.append((x.copy(), f, best))
        return f

    f0 = wrapped(x0[free])
    if not np.isfinite(f0):
        raise ValueError("loss is not finite at x0")
    if free.any() and max_evals > 1:
        _scipy_minimize(
            wrapped,
            x0[free],
            method="Nelder-Mead",
            bounds=list(zip(lo[free], hi[free])),
            options=dict(
                maxfev=max_evals - 1,
                xatol=xtol,
                fatol=np.inf,
                initial_simplex=_initial_simplex(x0[free], lo[free], hi[free]),
            ),
        )
    k = int(np.argmin([f for _, f, _ in trace]))
    return MinimizeResult(trace[k][0], trace[k][1], len(trace), trace)


def _trace_rows(trace):
    return [{"x": [float(v) for v in x], "loss": f, "best": b} for x, f, b in trace]


def calibrate_single_firm(historical: HistoricalCurve, init, seed: int, sim_runs: int = 20_000,
                          bounds=SINGLE_BOUNDS, fixed=FIXED, max_evals: int = 500,
                          workers: int = 1) -> CalibrationResult:
    """Fit (sigma, lam, jump_mean, jump_sd) of one firm with the other settings fixed."""

    def loss(x):
        _check_bounds(x, bounds, SINGLE_NAMES)
        return objective(single_firm_portfolio(*x, fixed=fixed), [historical], sim_runs, seed, workers)

    res = minimize(loss, init, bounds, max_evals=max_evals)
    params = dict(zip(SINGLE_NAMES, map(float, res.x)))
    return CalibrationResult(params, res.fun, res.evaluations, seed, _trace_rows(res.trace))


def pair_report(entries) -> dict:
    m = DiffusionMatrix(np.asarray(entries, dtype=float).reshape(2, 2))
    return {
        "sigma1": effective_vol(m, 0),
        "sigma2": effective_vol(m, 1),
        "rho12": diffusion_correlation(m, 0, 1),
    }


def calibrate_pair(historical: Sequence[HistoricalCurve], fixed_jumps, init, seed: int,
                   sim_runs: int = 20_000, bounds=PAIR_BOUNDS, fixed=FIXED, max_evals: int = 500,
                   uniform_corr=None, workers: int = 1) -> CalibrationResult:
    """Fit the 2x2 diffusion matrix with jump parameters held at ``fixed_jumps``.

    ``fixed_jumps`` is ``(lam, jump_mean, jump_sd)`` from a single-firm fit.
    """
    if len(historical) != 2:
        raise ValueError("pair calibration needs two historical curves")
    lam, jm, js = fixed_jumps

    def loss(x):
        _check_bounds(x, bounds, PAIR_NAMES)
        p = pair_portfolio(x, lam, jm, js, fixed=fixed, uniform_corr=uniform_corr)
        return objective(p, historical, sim_runs, seed, workers)

    res = minimize(loss, init, bounds, max_evals=max_evals)
    params = dict(zip(PAIR_NAMES, map(float, res.x)))
    return CalibrationResult(params, res.fun, res.evaluations, seed, _trace_rows(res.trace), pair_report(res.x))
