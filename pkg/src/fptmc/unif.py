"""UNIF engine: simulate jump to jump and sample interior crossings uniformly.

Per run, one timeline is shared by all firms. In each interval the engine
draws the pre-jump values, then for every surviving firm draws a correlated
uniform ``u`` and places a candidate crossing at ``T_{j-1} + u * b`` with
``b = tau / (1 - P)``. The candidate falls inside the interval with
probability ``1 - P``; an accepted crossing carries weight ``b * g(s)``. A
firm that survives the interval but lands on or below the boundary after the
jump defaults at the jump instant with weight 1.

Runs are vectorized in fixed-size blocks. Block ``k`` draws every variate
from ``RngStream(seed, run_index=k * block_size)``, so results depend only on
``(portfolio, n_runs, seed, block_size)`` and never on the worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .bridge import log_crossing_density_array
from .model import PortfolioSpec
from .stochastic import (
    JumpTimeline,
    RngStream,
    calibrate_mixing,
    correlated_uniforms,
    sample_timelines,
)

BLOCK_SIZE = 4096

CASE_NONE = 0
CASE_INTERIOR = 1
CASE_JUMP = 2
CASE_GRID = 3
CASE_TAGS = {CASE_INTERIOR: "interior", CASE_JUMP: "jump_boundary", CASE_GRID: "grid"}


@dataclass(frozen=True)
class FptSample:
    firm: int
    time: float
    weight: float
    case_tag: str


@dataclass(frozen=True)
class RunOutcome:
    """Result of one Monte Carlo run; ``samples[i]`` is None for survivors."""

    samples: tuple
    timeline: JumpTimeline

    @property
    def defaulted(self) -> tuple:
        return tuple(s is not None for s in self.samples)

    @property
    def default_times(self) -> tuple:
        return tuple(None if s is None else s.time for s in self.samples)


@dataclass
class Block:
    """Columnar results for a contiguous range of runs."""

    default_time: np.ndarray  # (n, F), inf for survivors
    weight: np.ndarray  # (n, F), 0 for survivors
    case: np.ndarray  # (n, F) int8
    counts: np.ndarray  # (n,) interior instants per run
    times: np.ndarray  # flat timeline instants, run after run
    flags: np.ndarray  # flat jump flags, run after run


def _pack(default_time, weight, case, tl) -> Block:
    k = tl.counts
    n = k.size
    width = tl.times.shape[1]
    keep_t = np.arange(width)[None, :] < (k + 2)[:, None]
    keep_f = np.arange(width - 2)[None, :] < k[:, None]
    return Block(default_time, weight, case, k.astype(np.int64), tl.times[keep_t], tl.is_jump[keep_f])


class SampleSet:
    """All run outcomes of one engine invocation, stored column-wise.

    Iterating or indexing yields :class:`RunOutcome` records in run order.
    """

    def __init__(self, blocks, portfolio: PortfolioSpec, seed: int, engine: str,
                 block_size: int = BLOCK_SIZE):
        self.portfolio = portfolio
        self.seed = int(seed)
        self.engine = engine
        self.block_size = block_size
        self.default_time = np.concatenate([b.default_time for b in blocks])
        self.weight = np.concatenate([b.weight for b in blocks])
        self.case = np.concatenate([b.case for b in blocks])
        self.counts = np.concatenate([b.counts for b in blocks])
        self._times = np.concatenate([b.times for b in blocks])
        self._flags = np.concatenate([b.flags for b in blocks])
        self._t_off = np.concatenate([[0], np.cumsum(self.counts + 2)])
        self._f_off = np.concatenate([[0], np.cumsum(self.counts)])

    @property
    def n_runs(self) -> int:
        return self.default_time.shape[0]

    @property
    def n_firms(self) -> int:
        return self.default_time.shape[1]

    def __len__(self):
        return self.n_runs

    def timeline(self, r: int) -> JumpTimeline:
        return JumpTimeline(
            self._times[self._t_off[r]: self._t_off[r + 1]].copy(),
            self._flags[self._f_off[r]: self._f_off[r + 1]].copy(),
        )

    def __getitem__(self, r: int) -> RunOutcome:
        if r < 0:
            r += self.n_runs
        if not 0 <= r < self.n_runs:
            raise IndexError(r)
        samples = []
        for i in range(self.n_firms):
            c = int(self.case[r, i])
            if c == CASE_NONE:
                samples.append(None)
            else:
                samples.append(FptSample(i, float(self.default_time[r, i]), float(self.weight[r, i]), CASE_TAGS[c]))
        return RunOutcome(tuple(samples), self.timeline(r))

    def __iter__(self):
        return (self[r] for r in range(self.n_runs))

    @property
    def outcomes(self) -> list:
        return list(self)

    def samples(self, firm: int):
        """First-passage times and weights of ``firm`` over all runs that defaulted."""
        hit = self.case[:, firm] != CASE_NONE
        return self.default_time[hit, firm], self.weight[hit, firm]

    def defaulted_by(self, t: float) -> np.ndarray:
        """Boolean (runs, firms) indicator of default at or before ``t``."""
        return self.default_time <= t

    def default_fraction(self, t: Optional[float] = None) -> np.ndarray:
        t = self.portfolio.horizon if t is None else t
        return self.defaulted_by(t).mean(axis=0)

    def equals(self, other: "SampleSet") -> bool:
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("default_time", "weight", "case", "counts", "_times", "_flags")
        )


def simulate_block(portfolio: PortfolioSpec, stream: RngStream, n: int) -> Block:
    """Run ``n`` UNIF runs from one stream."""
    rng = stream.rng
    T = portfolio.horizon
    F = portfolio.n_firms
    sigma_t = portfolio.diffusion.entries.T
    vol = portfolio.diffusion.vols
    var = vol * vol
    drift = portfolio.drift
    jmean, jsd = portfolio.jump_means, portfolio.jump_sds
    mix = calibrate_mixing(portfolio.uniform_target())

    tl = sample_timelines(portfolio.interjump_mean, T, rng, n, portfolio.jump_probability)
    kmax = tl.times.shape[1] - 2

    x = np.broadcast_to(portfolio.start, (n, F)).copy()
    alive = np.ones((n, F), dtype=bool)
    default_time = np.full((n, F), np.inf)
    weight = np.zeros((n, F))
    case = np.zeros((n, F), dtype=np.int8)

    for k in range(kmax + 1):
        rows = np.flatnonzero((tl.counts >= k) & alive.any(axis=1))
        if rows.size == 0:
            break
        m = rows.size
        t0 = tl.times[rows, k]
        tau = (tl.times[rows, k + 1] - t0)[:, None]
        xp = x[rows]
        xn = xp + drift * tau + np.sqrt(tau) * (rng.standard_normal((m, F)) @ sigma_t)
        u = correlated_uniforms(rng, (m, F), mix)
        z = jmean + jsd * rng.standard_normal((m, F))
        al = alive[rows]

        with np.errstate(all="ignore"):
            # crossing probability 1 - P; exactly 1 once the endpoint is below
            q = np.where(xn > 0, np.exp(np.maximum(-2.0 * xp * xn / (tau * var), -745.0)), 1.0)
            hit = al & (u < q)
            if hit.any():
                hr, hc = np.nonzero(hit)
                tau_h = tau[hr, 0]
                b = tau_h / q[hr, hc]
                off = np.minimum(u[hr, hc] * b, tau_h)
                lg = log_crossing_density_array(
                    xp[hr, hc], xn[hr, hc], drift[hc], vol[hc], off, tau_h - off
                )
                w = np.where(np.isfinite(lg), b * np.exp(lg), 0.0)
                run = rows[hr]
                default_time[run, hc] = t0[hr] + off
                weight[run, hc] = w
                case[run, hc] = CASE_INTERIOR

        if k < kmax:
            jumps = tl.is_jump[rows, k]
            xn = xn + np.where(jumps[:, None], z, 0.0)
            jd = al & ~hit & jumps[:, None] & (xn <= 0)
            if jd.any():
                jr, jc = np.nonzero(jd)
                default_time[rows[jr], jc] = tl.times[rows[jr], k + 1]
                weight[rows[jr], jc] = 1.0
                case[rows[jr], jc] = CASE_JUMP
            al = al & ~jd
        x[rows] = xn
        alive[rows] = al & ~hit

    return _pack(default_time, weight, case, tl)


def _block_task(args):
    kernel, portfolio, seed, start, size, kwargs = args
    return kernel(portfolio, RngStream(seed, start), size, **kwargs)


def run_blocks(kernel: Callable, portfolio: PortfolioSpec, n_runs: int, seed: int,
               workers: int = 1, block_size: int = BLOCK_SIZE, **kwargs) -> list:
    """Evaluate ``kernel`` over consecutive run blocks, in run order."""
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    tasks = [
        (kernel, portfolio, seed, start, min(block_size, n_runs - start), kwargs)
        for start in range(0, n_runs, block_size)
    ]
    if workers <= 1 or len(tasks) == 1:
        return [_block_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_block_task, tasks))


def simulate(portfolio: PortfolioSpec, n_runs: int, seed: int, workers: int = 1,
             block_size: int = BLOCK_SIZE) -> SampleSet:
    """``n_runs`` independent UNIF runs; identical for any ``workers``."""
    blocks = run_blocks(simulate_block, portfolio, n_runs, seed, workers, block_size)
    return SampleSet(blocks, portfolio, seed, "unif", block_size)


def simulate_run(portfolio: PortfolioSpec, stream: RngStream) -> RunOutcome:
    """A single UNIF run drawn from ``stream``."""
    block = simulate_block(portfolio, stream, 1)
    return SampleSet([block], portfolio, stream.master_seed, "unif", 1)[0]
