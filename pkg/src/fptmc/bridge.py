"""Brownian-bridge quantities between consecutive jump instants.

All formulas assume a boundary that is constant over the interval, which is
exact in the shifted coordinates used by the engines. The array kernels take
distances to the boundary (``a = x_prev - D``, ``b = x_next - D``) and are
what the engines call; the scalar wrappers validate and document.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

LOG_2PI = np.log(2.0 * np.pi)
_EXP_FLOOR = -745.0


@dataclass(frozen=True)
class IntervalEndpoints:
    t_prev: float
    t_next: float
    x_prev: float
    x_next: float
    mu: float
    sigma: float
    boundary: float = 0.0

    def __post_init__(self):
        if not self.t_next > self.t_prev:
            raise ValueError("t_next must exceed t_prev")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @property
    def tau(self) -> float:
        return self.t_next - self.t_prev


def survival_array(a, b, tau, sigma):
    """No-crossing probability of a bridge from ``a > 0`` to ``b`` above 0."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    arg = np.maximum(-2.0 * a * b / (tau * sigma * sigma), _EXP_FLOOR)
    return np.where(b > 0, -np.expm1(arg), 0.0)


def log_crossing_density_array(a, b, mu, sigma, u, v):
    """Log of the conditional first-crossing density.

    ``u`` is the time since the left endpoint and ``v`` the time to the right
    one. The density is the first-passage density of drifted Brownian motion
    from ``a`` to 0 at ``u`` times the transition density from 0 to ``b``
    over ``v``, divided by the unconditional transition density ``y`` from
    ``a`` to ``b`` over ``u + v``. Evaluating in logs keeps ``y`` from
    underflowing.
    """
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    tau = u + v
    s2 = sigma * sigma
    log_y = -np.log(sigma) - 0.5 * (LOG_2PI + np.log(tau)) - (a - b + mu * tau) ** 2 / (2.0 * tau * s2)
    with np.errstate(divide="ignore"):
        return (
            np.log(a)
            - np.log(2.0 * np.pi * s2)
            - log_y
            - 1.5 * np.log(u)
            - 0.5 * np.log(v)
            - (b - mu * v) ** 2 / (2.0 * v * s2)
            - (a + mu * u) ** 2 / (2.0 * u * s2)
        )


def crossing_density_array(a, b, mu, sigma, u, v):
    lg = log_crossing_density_array(a, b, mu, sigma, u, v)
    return np.exp(np.maximum(lg, _EXP_FLOOR)) * (lg > _EXP_FLOOR)


def survival_probability(e: IntervalEndpoints) -> float:
    """Probability that the bridge stays above the boundary on the interval."""
    if e.x_prev <= e.boundary:
        raise ValueError("process is already at or below the boundary at the left endpoint")
    return float(survival_array(e.x_prev - e.boundary, e.x_next - e.boundary, e.tau, e.sigma))


def crossing_density(e: IntervalEndpoints, t):
    """Conditional density of the first crossing at ``t`` given both endpoints.

    Integrates to ``1 - survival_probability(e)`` over the interval.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= e.t_prev) or np.any(t >= e.t_next):
        raise ValueError("t must lie strictly inside the interval")
    if e.x_prev < e.boundary:
        raise ValueError("process starts below the boundary")
    if e.x_prev == e.boundary:
        out = np.zeros_like(t)
    else:
        out = crossing_density_array(
            e.x_prev - e.boundary, e.x_next - e.boundary, e.mu, e.sigma, t - e.t_prev, e.t_next - t
        )
    return float(out) if out.ndim == 0 else out


def first_jump_default_index(prejump: Sequence[float], postjump: Sequence[float],
                             boundaries: Sequence[float]) -> Optional[int]:
    """Index (1-based) of the first jump that lands the process on or below the boundary.

    Returns None when a diffusion crossing (a pre-jump value at or below the
    boundary) comes first or when no jump ever crosses.
    """
    if not len(prejump) == len(postjump) == len(boundaries):
        raise ValueError("prejump, postjump and boundaries must be aligned")
    for j, (pre, post, d) in enumerate(zip(prejump, postjump, boundaries), start=1):
        if pre <= d:
            return None
        if post <= d:
            return j
    return None
