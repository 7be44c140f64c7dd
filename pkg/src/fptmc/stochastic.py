"""Reproducible random sampling for the simulation engines.

Every variate comes from an :class:`RngStream` keyed by
``(master_seed, run_index, substream_counter)``; the key is hashed by numpy's
``SeedSequence`` so that streams for different keys are independent and the
whole variate sequence is a pure function of the key.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

log = logging.getLogger(__name__)


class RngStream:
    """Single-owner random stream for one run (or one block of runs)."""

    def __init__(self, master_seed: int, run_index: int = 0, substream_counter: int = 0):
        if master_seed < 0 or run_index < 0 or substream_counter < 0:
            raise ValueError("stream keys must be nonnegative")
        self.master_seed = int(master_seed)
        self.run_index = int(run_index)
        self.substream_counter = int(substream_counter)
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.run_index, self.substream_counter))
        self.rng = np.random.Generator(np.random.PCG64(seq))

    def substream(self, counter: int) -> "RngStream":
        return RngStream(self.master_seed, self.run_index, counter)

    def __repr__(self):
        return f"RngStream({self.master_seed}, {self.run_index}, {self.substream_counter})"


@dataclass(frozen=True, eq=False)
class JumpTimeline:
    """Ordered instants ``0 = T_0 < T_1 < ... < T_M < T_{M+1} = T``.

    ``is_jump[k]`` tells whether the interior instant ``T_{k+1}`` carries a
    jump; instants without one only split the Brownian path.
    """

    instants: np.ndarray
    is_jump: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.instants, dtype=float)
        if t.size < 2 or t[0] != 0 or np.any(np.diff(t) <= 0):
            raise ValueError("timeline must start at 0 and be strictly increasing")
        if np.asarray(self.is_jump).shape != (t.size - 2,):
            raise ValueError("is_jump must flag each interior instant")

    @property
    def count(self) -> int:
        return self.instants.size - 2

    @property
    def horizon(self) -> float:
        return float(self.instants[-1])


@dataclass(frozen=True)
class TimelineBatch:
    """Timelines for a block of runs, padded to a rectangle.

    ``times[r, :counts[r] + 2]`` is run ``r``'s timeline; the padding repeats
    the horizon.
    """

    times: np.ndarray
    is_jump: np.ndarray
    counts: np.ndarray

    def timeline(self, r: int) -> JumpTimeline:
        m = int(self.counts[r])
        return JumpTimeline(self.times[r, : m + 2].copy(), self.is_jump[r, :m].copy())


def sample_timelines(interjump_mean: float, horizon: float, rng: np.random.Generator, n: int,
                     jump_prob: float = 1.0) -> TimelineBatch:
    """Draw ``n`` independent timelines with exponential gaps."""
    if not interjump_mean > 0 or not horizon > 0:
        raise ValueError("interjump_mean and horizon must be positive")
    rate = horizon / interjump_mean
    width = int(min(rate + 6.0 * np.sqrt(rate) + 4, 1e6))
    cum = np.cumsum(rng.exponential(interjump_mean, size=(n, width)), axis=1)
    while n and cum[:, -1].min() < horizon:
        more = np.cumsum(rng.exponential(interjump_mean, size=(n, width)), axis=1)
        cum = np.concatenate([cum, cum[:, -1:] + more], axis=1)
    inside = cum < horizon
    counts = inside.sum(axis=1)
    kmax = int(counts.max()) if n else 0
    times = np.full((n, kmax + 2), float(horizon))
    times[:, 0] = 0.0
    times[:, 1: kmax + 1] = np.where(inside[:, :kmax], cum[:, :kmax], horizon)
    flags = rng.random((n, kmax)) < jump_prob
    flags &= inside[:, :kmax]
    return TimelineBatch(times, flags, counts)


def sample_jump_timeline(interjump_mean: float, horizon: float, stream: RngStream,
                         jump_prob: float = 1.0) -> JumpTimeline:
    """One timeline shared by every firm of a run."""
    return sample_timelines(interjump_mean, horizon, stream.rng, 1, jump_prob).timeline(0)


def sample_interjump_endpoint(x_prev, drift, diffusion, tau, stream: RngStream):
    """Values just before the next instant given values just after the last one.

    The increment is ``drift * tau + sqrt(tau) * sigma @ N(0, I)``, so its
    covariance is ``tau * sigma sigma^T``. ``x_prev`` may carry leading batch
    dimensions; ``tau`` must broadcast against them.
    """
    sigma = diffusion.entries if hasattr(diffusion, "entries") else np.atleast_2d(np.asarray(diffusion, dtype=float))
    x_prev = np.asarray(x_prev, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0):
        raise ValueError("tau must be positive")
    z = stream.rng.standard_normal(x_prev.shape)
    scale = np.sqrt(tau)[..., None] if tau.ndim else np.sqrt(tau)
    return x_prev + np.asarray(drift) * (tau[..., None] if tau.ndim else tau) + scale * (z @ sigma.T)


def sample_jump_sizes(firms, stream: RngStream, size=None) -> np.ndarray:
    """Independent normal jump sizes, one per firm (last axis)."""
    means = np.array([f.jump_mean for f in firms])
    sds = np.array([f.jump_sd for f in firms])
    shape = (len(means),) if size is None else tuple(np.atleast_1d(size)) + (len(means),)
    return means + sds * stream.rng.standard_normal(shape)


# --- sum-of-uniforms ---------------------------------------------------------
#
# S_i = a * U_0 + U_i with U_0 shared; S_i has a trapezoidal law on [0, 1 + a]
# and s_i = F_a(S_i) is exactly uniform. a = 0 gives independent uniforms and
# the pairwise correlation rises monotonically to 1 as a grows.


def trapezoid_cdf(s, a: float):
    """CDF of ``a * U_0 + U`` for independent standard uniforms."""
    s = np.asarray(s, dtype=float)
    if a == 0:
        return np.clip(s, 0.0, 1.0)
    lo, hi = min(1.0, a), max(1.0, a)
    top = 1.0 + a
    out = np.where(
        s <= lo,
        s * s / (2 * a),
        np.where(s <= hi, (0.5 * lo * lo + lo * (s - lo)) / a, 1.0 - (top - s) ** 2 / (2 * a)),
    )
    return np.clip(np.where(s <= 0, 0.0, np.where(s >= top, 1.0, out)), 0.0, 1.0)


def _trapezoid_cdf_integral(s, a):
    # antiderivative G of trapezoid_cdf with G(0) = 0
    s = np.asarray(s, dtype=float)
    lo, hi = min(1.0, a), max(1.0, a)
    top = 1.0 + a
    g_lo = lo ** 3 / (6 * a)
    g_hi = g_lo + (0.5 * lo * lo * (hi - lo) + 0.5 * lo * (hi - lo) ** 2) / a
    sc = np.clip(s, 0.0, top)
    out = np.where(
        sc <= lo,
        sc ** 3 / (6 * a),
        np.where(
            sc <= hi,
            g_lo + (0.5 * lo * lo * (sc - lo) + 0.5 * lo * (sc - lo) ** 2) / a,
            g_hi + (sc - hi) - (lo ** 3 - (top - sc) ** 3) / (6 * a),
        ),
    )
    return out + np.where(s > top, s - top, 0.0)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def uniform_pair_correlation(a: float) -> float:
    """Pearson correlation of two sum-of-uniforms variates with mixing ``a``.

    ``E[s_1 s_2] = E[h(U_0)^2]`` with ``h(u) = G(a u + 1) - G(a u)``; ``h`` is a
    piecewise cubic in ``u`` so Gauss-Legendre on each piece is exact.
    """
    if a < 0:
        raise ValueError("mixing coefficient must be nonnegative")
    if a == 0:
        return 0.0
    lo, hi = min(1.0, a), max(1.0, a)
    knots = {0.0, 1.0}
    for b in (lo, hi, 1.0 + a):
        for shift in (0.0, 1.0):
            u = (b - shift) / a
            if 0 < u < 1:
                knots.add(u)
    knots = np.array(sorted(knots))
    left, right = knots[:-1], knots[1:]
    half = 0.5 * (right - left)
    u = (0.5 * (left + right))[:, None] + half[:, None] * _GL_NODES[None, :]
    h = _trapezoid_cdf_integral(a * u + 1.0, a) - _trapezoid_cdf_integral(a * u, a)
    second = float((half[:, None] * _GL_WEIGHTS[None, :] * h * h).sum())
    return 12.0 * second - 3.0


def calibrate_mixing(target_corr: float) -> float:
    """Mixing coefficient whose sum-of-uniforms pair has correlation ``target_corr``."""
    if not 0 <= target_corr < 1:
        raise ValueError("target correlation must lie in [0, 1)")
    if target_corr == 0:
        return 0.0
    hi = 1.0
    while uniform_pair_correlation(hi) < target_corr:
        hi *= 2.0
        if hi > 1e8:
            raise ValueError(f"target correlation {target_corr} is not reachable")
    return float(brentq(lambda a: uniform_pair_correlation(a) - target_corr, 0.0, hi, xtol=1e-14, rtol=1e-14))


def equicorrelation_target(target_corr, n: int) -> float:
    """Reduce a scalar or pairwise target to one nonnegative equicorrelation."""
    r = np.asarray(target_corr, dtype=float)
    if r.ndim == 0:
        value = float(r)
    else:
        if r.shape != (n, n):
            raise ValueError(f"pairwise targets must be {n}x{n}")
        off = r[~np.eye(n, dtype=bool)]
        value = float(off.mean()) if off.size else 0.0
        if off.size and np.ptp(off) > 1e-12:
            log.warning("pairwise uniform targets are not equal; using their mean %.4f", value)
    if not 0 <= value < 1:
        raise ValueError(f"infeasible correlation target {value}: need a value in [0, 1)")
    return value


def correlated_uniforms(rng: np.random.Generator, shape, a: float) -> np.ndarray:
    """Sum-of-uniforms draws; the last axis holds the mutually correlated firms."""
    shape = tuple(shape)
    common = rng.random(shape[:-1] + (1,))
    own = rng.random(shape)
    if a == 0:
        return own
    return trapezoid_cdf(a * common + own, a)


def sample_correlated_uniforms(n: int, target_corr, stream: RngStream, size=None) -> np.ndarray:
    """``n`` uniforms on [0, 1] with pairwise correlation ``target_corr``.

    ``size`` adds leading sample dimensions.
    """
    if n < 1:
        raise ValueError("n must be positive")
    a = calibrate_mixing(equicorrelation_target(target_corr, n))
    shape = (n,) if size is None else tuple(np.atleast_1d(size)) + (n,)
    return correlated_uniforms(stream.rng, shape, a)
