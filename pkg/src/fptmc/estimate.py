"""Density, cumulative-rate and default-correlation estimators."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import gammaln

GRID_SIZE = 512
SQRT_HALF_PI = np.sqrt(np.pi / 2.0)


class DegenerateCorrelationWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class GammaFit:
    """Gamma approximation ``alpha^beta t^(beta-1) e^(-alpha t) / Gamma(beta)``."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.beta >= 3:
            raise ValueError("beta must be at least 3")


@dataclass(frozen=True)
class DensityEstimate:
    grid: np.ndarray
    values: np.ndarray
    bandwidth: float
    n_runs: int


@dataclass(frozen=True)
class RateCurve:
    grid: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rates)
        if np.any(np.diff(r) < 0) or np.any((r < 0) | (r > 1)):
            raise ValueError("rates must be nondecreasing within [0, 1]")

    def at(self, t):
        return np.interp(t, self.grid, self.rates)

    # alias so a RateCurve can stand in for a historical curve
    @property
    def times(self):
        return self.grid


@dataclass(frozen=True)
class CorrelationReport:
    horizons: np.ndarray
    rho: np.ndarray
    p_a: np.ndarray
    p_b: np.ndarray
    p_ab: np.ndarray
    stderr: np.ndarray


def fit_gamma(times, weights=None) -> GammaFit:
    """Weighted method-of-moments gamma fit, shape clamped up to 3.

    Clamping keeps the mean: ``alpha = 3 / mean``.
    """
    times = np.asarray(times, dtype=float)
    w = np.ones_like(times) if weights is None else np.asarray(weights, dtype=float)
    if times.size < 2 or w.sum() <= 0:
        raise ValueError("need at least two samples with positive total weight")
    m = np.average(times, weights=w)
    v = np.average((times - m) ** 2, weights=w)
    if not v > 0:
        raise ValueError("samples have zero variance")
    beta = m * m / v
    if beta < 3:
        return GammaFit(3.0 / m, 3.0)
    return GammaFit(m / v, beta)


def bandwidth_integral(fit: GammaFit) -> float:
    """Closed-form ``integral (f'')^2 dt`` for the gamma density."""
    a, b = fit.alpha, fit.beta
    if b < 3:
        raise ValueError("beta must be at least 3")
    A = a * a
    B = -2.0 * a * (b - 1.0)
    C = (b - 1.0) * (b - 2.0)
    W = np.array([A * A, 2 * A * B, B * B + 2 * A * C, 2 * B * C, C * C])
    i = np.arange(1, 6)
    mag = np.log(np.abs(W) + 0.0) + i * np.log(a) + gammaln(2 * b - i) - (2 * b - i) * np.log(2.0) - 2 * gammaln(b)
    with np.errstate(divide="ignore"):
        terms = np.sign(W) * np.exp(np.where(W != 0, mag, -np.inf))
    return float(terms.sum())


def optimal_bandwidth(fit: GammaFit, n: int) -> float:
    """``(2 n sqrt(pi) integral (f'')^2)^(-1/5)``."""
    if n < 1:
        raise ValueError("n must be positive")
    return float((2.0 * n * np.sqrt(np.pi) * bandwidth_integral(fit)) ** -0.2)


def kernel(h: float, u):
    """Gaussian kernel with standard deviation ``h / 2``."""
    u = np.asarray(u, dtype=float)
    return np.exp(-(u * u) / (h * h / 2.0)) / (SQRT_HALF_PI * h)


def kde(times, weights, h: float, grid, n_runs: int, chunk: int = 4096) -> DensityEstimate:
    """Weighted kernel sum divided by the number of runs (not of samples)."""
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    if n_runs < 1:
        raise ValueError("n_runs must be positive")
    grid = np.asarray(grid, dtype=float)
    times = np.asarray(times, dtype=float)
    w = np.ones_like(times) if weights is None else np.asarray(weights, dtype=float)
    values = np.zeros_like(grid)
    for s in range(0, times.size, chunk):
        d = grid[:, None] - times[None, s: s + chunk]
        values += kernel(h, d) @ w[s: s + chunk]
    return DensityEstimate(grid, values / n_runs, float(h), int(n_runs))


def cumulative_rates(density: DensityEstimate) -> RateCurve:
    """Trapezoidal running integral of the density from the first grid point."""
    p = cumulative_trapezoid(density.values, density.grid, initial=0.0)
    p = np.maximum.accumulate(np.clip(p, 0.0, 1.0))
    return RateCurve(density.grid, p)


def default_grid(horizon: float, size: int = GRID_SIZE) -> np.ndarray:
    return np.linspace(0.0, horizon, size)


@dataclass(frozen=True)
class FirmEstimate:
    density: DensityEstimate
    rates: RateCurve
    fit: GammaFit | None


def estimate_firm(sample_set, firm: int, grid=None, bandwidth: float | None = None) -> FirmEstimate:
    """Gamma-fit bandwidth, KDE and cumulative rates for one firm of a SampleSet.

    Bandwidth uses the number of first-passage samples as the point count.
    """
    grid = default_grid(sample_set.portfolio.horizon) if grid is None else np.asarray(grid, dtype=float)
    times, w = sample_set.samples(firm)
    keep = w > 0
    times, w = times[keep], w[keep]
    fit = None
    if bandwidth is None:
        if times.size < 2 or np.ptp(times) == 0:
            dens = DensityEstimate(grid, np.zeros_like(grid), np.nan, sample_set.n_runs)
            if times.size:
                # one distinct default time: fall back to a tenth of the horizon
                dens = kde(times, w, 0.1 * sample_set.portfolio.horizon, grid, sample_set.n_runs)
            return FirmEstimate(dens, cumulative_rates(dens), None)
        fit = fit_gamma(times, w)
        bandwidth = optimal_bandwidth(fit, times.size)
    dens = kde(times, w, bandwidth, grid, sample_set.n_runs)
    return FirmEstimate(dens, cumulative_rates(dens), fit)


def _rho_and_stderr(pa, pb, pab, n):
    qa, qb = 1.0 - pa, 1.0 - pb
    d = np.sqrt(pa * qa * pb * qb)
    rho = (pab - pa * pb) / d
    g11 = 1.0 / d
    ga = -pb / d - rho * (1.0 - 2.0 * pa) / (2.0 * pa * qa)
    gb = -pa / d - rho * (1.0 - 2.0 * pb) / (2.0 * pb * qb)
    grad = np.array([g11, ga, gb])
    cov = np.array([
        [pab * (1 - pab), pab * qa, pab * qb],
        [pab * qa, pa * qa, pab - pa * pb],
        [pab * qb, pab - pa * pb, pb * qb],
    ]) / n
    return float(rho), float(np.sqrt(max(grad @ cov @ grad, 0.0)))


def default_correlation(sample_set, firm_a: int, firm_b: int, t: float):
    """Default correlation of two firms by ``t`` from run-level indicators.

    Returns ``(rho, p_a, p_b, p_ab, stderr)``; ``rho`` and ``stderr`` are NaN
    (with a warning) when either probability is 0 or 1.
    """
    if firm_a == firm_b:
        raise ValueError("need two distinct firms")
    hit = sample_set.defaulted_by(t)
    A, B = hit[:, firm_a], hit[:, firm_b]
    n = A.size
    pa, pb, pab = A.mean(), B.mean(), (A & B).mean()
    if pa in (0.0, 1.0) or pb in (0.0, 1.0):
        warnings.warn(
            f"default correlation undefined at t={t}: p_a={pa}, p_b={pb}",
            DegenerateCorrelationWarning,
            stacklevel=2,
        )
        return float("nan"), float(pa), float(pb), float(pab), float("nan")
    rho, se = _rho_and_stderr(pa, pb, pab, n)
    return rho, float(pa), float(pb), float(pab), se


def correlation_report(sample_set, firm_a: int, firm_b: int, horizons) -> CorrelationReport:
    rows = [default_correlation(sample_set, firm_a, firm_b, t) for t in horizons]
    cols = np.array(rows, dtype=float).T if rows else np.zeros((5, 0))
    return CorrelationReport(np.asarray(horizons, dtype=float), cols[0], cols[1], cols[2], cols[3], cols[4])
