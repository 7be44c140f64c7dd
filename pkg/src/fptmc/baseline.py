"""Reference methods: a fixed-grid Euler simulator and the no-jump closed form."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import ndtr

from .model import PortfolioSpec
from .stochastic import RngStream, sample_timelines
from .unif import BLOCK_SIZE, CASE_GRID, SampleSet, _pack, run_blocks

STEP_CHUNK = 128


@dataclass(frozen=True)
class EulerConfig:
    dt: float = 0.005
    n_runs: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_runs < 1:
            raise ValueError("n_runs must be at least 1")


def euler_grid(horizon: float, dt: float) -> np.ndarray:
    if dt > horizon:
        raise ValueError("dt must not exceed the horizon")
    n_steps = int(np.ceil(horizon / dt - 1e-9))
    grid = np.arange(n_steps + 1) * dt
    grid[-1] = horizon
    return grid


def euler_block(portfolio: PortfolioSpec, stream: RngStream, n: int, dt: float):
    """Advance ``n`` runs on a fixed grid and record the first grid point at or below 0.

    Jumps come from the same timeline law as UNIF and are applied at the
    first grid point at or after their instant. No intra-step crossing check.
    """
    rng = stream.rng
    T = portfolio.horizon
    F = portfolio.n_firms
    sigma_t = portfolio.diffusion.entries.T
    drift = portfolio.drift

    tl = sample_timelines(portfolio.interjump_mean, T, rng, n, portfolio.jump_probability)
    kmax = tl.times.shape[1] - 2
    sizes = portfolio.jump_means + portfolio.jump_sds * rng.standard_normal((n, kmax, F))
    jr, jk = np.nonzero(tl.is_jump)
    grid = euler_grid(T, dt)
    jstep = np.searchsorted(grid, tl.times[jr, jk + 1], side="left")
    steps = np.diff(grid)
    n_steps = steps.size

    x = np.broadcast_to(portfolio.start, (n, F)).copy()
    alive = np.ones((n, F), dtype=bool)
    default_time = np.full((n, F), np.inf)
    for c0 in range(0, n_steps, STEP_CHUNK):
        c1 = min(c0 + STEP_CHUNK, n_steps)
        h = steps[c0:c1, None]
        inc = drift * h + np.sqrt(h) * (rng.standard_normal((n, c1 - c0, F)) @ sigma_t)
        sel = (jstep > c0) & (jstep <= c1)
        if sel.any():
            np.add.at(inc, (jr[sel], jstep[sel] - c0 - 1), sizes[jr[sel], jk[sel]])
        path = x[:, None, :] + np.cumsum(inc, axis=1)
        below = path <= 0
        crossed = below.any(axis=1)
        new = alive & crossed
        if new.any():
            first = np.argmax(below, axis=1)
            default_time[new] = grid[c0 + 1 + first[new]]
        alive &= ~crossed
        x = path[:, -1, :]
        if not alive.any():
            break

    hit = np.isfinite(default_time)
    return _pack(default_time, hit.astype(float), np.where(hit, CASE_GRID, 0).astype(np.int8), tl)


def euler_simulate(portfolio: PortfolioSpec, cfg: EulerConfig, workers: int = 1,
                   block_size: int = BLOCK_SIZE) -> SampleSet:
    """Conventional discretized Monte Carlo; samples carry weight 1."""
    euler_grid(portfolio.horizon, cfg.dt)
    blocks = run_blocks(euler_block, portfolio, cfg.n_runs, cfg.seed, workers, block_size, dt=cfg.dt)
    return SampleSet(blocks, portfolio, cfg.seed, "euler", block_size)


def nojump_default_probability(z, t):
    """Default probability by ``t`` without jumps: ``2 * Phi(-z / sqrt(t))``."""
    z = np.asarray(z, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(z <= 0) or np.any(t < 0):
        raise ValueError("need z > 0 and t >= 0")
    with np.errstate(divide="ignore"):
        out = np.where(t > 0, 2.0 * ndtr(-z / np.sqrt(np.where(t > 0, t, 1.0))), 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DistanceFit:
    z: float
    loss: float
    saturated: bool


def fit_distance_to_default(historical, bounds=(1e-3, 40.0), xtol=1e-5) -> DistanceFit:
    """Distance to default minimizing the squared per-year rate mismatch.

    ``saturated`` is set when the optimum sits on the upper bound, i.e. the
    data show no defaults the closed form can explain.
    """
    t = np.asarray(historical.times, dtype=float)
    a = np.asarray(historical.rates, dtype=float)
    if t.size == 0:
        raise ValueError("historical curve is empty")
    if np.any(t <= 0) or np.any((a < 0) | (a > 1)):
        raise ValueError("historical curve needs positive times and rates in [0, 1]")

    def loss(z):
        return float(np.sum(((nojump_default_probability(z, t) - a) / t) ** 2))

    res = minimize_scalar(loss, bounds=bounds, method="bounded", options={"xatol": xtol})
    z, f = float(res.x), float(res.fun)
    f_hi = loss(bounds[1])
    if f_hi <= f:
        return DistanceFit(float(bounds[1]), f_hi, True)
    return DistanceFit(z, f, False)
