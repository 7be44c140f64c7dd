"""Firm, diffusion and portfolio specifications.

Log-asset values follow ``dX_i = mu_i dt + sum_k sigma_ik dW_k + dZ_i`` and
firm ``i`` defaults when ``X_i`` falls to ``gamma_i * t + ln(kappa_i)``.
Downstream code works in shifted coordinates ``Y_i = X_i - gamma_i t - ln kappa_i``
where the boundary is the constant 0 and the drift is ``mu_i - gamma_i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class FirmSpec:
    """Single-firm parameters.

    Parameters
    ----------
    x0 : float
        Initial log-asset value.
    mu : float
        Drift of the log-asset value per unit time.
    kappa_log : float
        Log liability level ``ln(kappa)``.
    gamma : float
        Liability growth rate.
    jump_mean, jump_sd : float
        Mean and standard deviation of the normal jump size (log units).
    """

    x0: float
    mu: float
    kappa_log: float = 0.0
    gamma: float = 0.0
    jump_mean: float = 0.0
    jump_sd: float = 1.0

    def __post_init__(self):
        for name in ("x0", "mu", "kappa_log", "gamma", "jump_mean", "jump_sd"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.x0 <= self.kappa_log:
            raise ValueError("firm must start above its default threshold (x0 > kappa_log)")
        if self.jump_sd < 0:
            raise ValueError("jump_sd must be nonnegative")

    @property
    def distance(self) -> float:
        """Initial distance to the boundary in log units."""
        return self.x0 - self.kappa_log

    @property
    def shifted_drift(self) -> float:
        return self.mu - self.gamma


@dataclass(frozen=True, eq=False)
class DiffusionMatrix:
    """Loading matrix ``sigma`` whose row ``i`` drives firm ``i``."""

    entries: np.ndarray

    def __post_init__(self):
        m = np.array(self.entries, dtype=float)
        if m.ndim == 0:
            m = m.reshape(1, 1)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"diffusion matrix must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("diffusion matrix has non-finite entries")
        if np.any(np.sqrt((m * m).sum(axis=1)) <= 0):
            raise ValueError("every firm needs a nonzero diffusion row")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    def __eq__(self, other):
        return isinstance(other, DiffusionMatrix) and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash(self.entries.tobytes())

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def covariance(self) -> np.ndarray:
        return self.entries @ self.entries.T

    @property
    def vols(self) -> np.ndarray:
        return np.sqrt((self.entries ** 2).sum(axis=1))

    def correlation(self) -> np.ndarray:
        v = self.vols
        return self.covariance / np.outer(v, v)

    def tolist(self) -> list:
        return self.entries.tolist()


@dataclass(frozen=True)
class PortfolioSpec:
    """N correlated firms sharing one jump timeline.

    Jump instants arrive with exponential gaps of mean ``interjump_mean``;
    each instant carries a jump (common to all firms, sizes independent per
    firm) with probability ``lam * interjump_mean``, so jumps form a Poisson
    process of intensity ``lam``.

    ``uniform_corr`` overrides the correlation target of the per-interval
    uniforms; by default the mean pairwise diffusion correlation is used.
    """

    firms: tuple
    diffusion: DiffusionMatrix
    lam: float
    interjump_mean: float
    horizon: float
    uniform_corr: Optional[float] = None

    def __post_init__(self):
        firms = tuple(self.firms)
        object.__setattr__(self, "firms", firms)
        if not isinstance(self.diffusion, DiffusionMatrix):
            object.__setattr__(self, "diffusion", DiffusionMatrix(self.diffusion))
        if len(firms) < 1:
            raise ValueError("portfolio needs at least one firm")
        if not all(isinstance(f, FirmSpec) for f in firms):
            raise TypeError("firms must be FirmSpec instances")
        if self.diffusion.n != len(firms):
            raise ValueError(
                f"diffusion matrix is {self.diffusion.n}x{self.diffusion.n} "
                f"but portfolio has {len(firms)} firms"
            )
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if not self.lam >= 0:
            raise ValueError("lam must be nonnegative")
        if not self.interjump_mean > 0:
            raise ValueError("interjump_mean must be positive")
        if self.lam * self.interjump_mean > 1 + 1e-12:
            raise ValueError(
                "jump intensity exceeds the instant rate: need lam * interjump_mean <= 1 "
                f"(got {self.lam} * {self.interjump_mean})"
            )
        if self.uniform_corr is not None and not 0 <= self.uniform_corr < 1:
            raise ValueError("uniform_corr must lie in [0, 1)")

    @property
    def n_firms(self) -> int:
        return len(self.firms)

    @property
    def jump_probability(self) -> float:
        """Probability that a timeline instant carries a jump."""
        return min(1.0, self.lam * self.interjump_mean)

    @property
    def start(self) -> np.ndarray:
        """Initial values in shifted coordinates."""
        return np.array([f.distance for f in self.firms])

    @property
    def drift(self) -> np.ndarray:
        """Drifts in shifted coordinates."""
        return np.array([f.shifted_drift for f in self.firms])

    @property
    def jump_means(self) -> np.ndarray:
        return np.array([f.jump_mean for f in self.firms])

    @property
    def jump_sds(self) -> np.ndarray:
        return np.array([f.jump_sd for f in self.firms])

    def uniform_target(self) -> float:
        """Equicorrelation target for the per-interval correlated uniforms."""
        if self.uniform_corr is not None:
            return float(self.uniform_corr)
        n = self.n_firms
        if n < 2:
            return 0.0
        c = self.diffusion.correlation()
        mean = c[~np.eye(n, dtype=bool)].mean()
        return float(min(max(mean, 0.0), 0.999))

    def replace(self, **changes) -> "PortfolioSpec":
        from dataclasses import replace

        return replace(self, **changes)


def threshold_level(firm: FirmSpec, t):
    """Log default boundary ``gamma * t + ln(kappa)``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    out = firm.gamma * t + firm.kappa_log
    return float(out) if out.ndim == 0 else out


def _row(diffusion, i):
    m = diffusion.entries if isinstance(diffusion, DiffusionMatrix) else np.atleast_2d(
        np.asarray(diffusion, dtype=float)
    )
    if not 0 <= i < m.shape[0]:
        raise IndexError(f"firm index {i} out of range")
    return m[i]


def effective_vol(diffusion, i: int) -> float:
    """Total volatility of firm ``i``: the Euclidean norm of its loading row."""
    v = float(np.linalg.norm(_row(diffusion, i)))
    if v <= 0:
        raise ValueError(f"firm {i} has an all-zero diffusion row")
    return v


def diffusion_correlation(diffusion, i: int, j: int) -> float:
    """Correlation of the diffusion parts of firms ``i`` and ``j``."""
    if i == j:
        raise ValueError("need two distinct firms")
    ri, rj = _row(diffusion, i), _row(diffusion, j)
    ni, nj = np.linalg.norm(ri), np.linalg.norm(rj)
    if ni <= 0 or nj <= 0:
        raise ValueError("zero diffusion row")
    return float(np.clip(ri @ rj / (ni * nj), -1.0, 1.0))


def decompose_covariance(H0) -> DiffusionMatrix:
    """Lower-triangular loading matrix whose outer product is ``H0``."""
    H0 = np.atleast_2d(np.asarray(H0, dtype=float))
    if H0.shape[0] != H0.shape[1]:
        raise ValueError("covariance must be square")
    if not np.allclose(H0, H0.T, rtol=1e-12, atol=0):
        raise ValueError("covariance must be symmetric")
    try:
        L = np.linalg.cholesky(H0)
    except np.linalg.LinAlgError as exc:
        raise ValueError("covariance is not positive definite") from exc
    return DiffusionMatrix(L)


def diffusion_from_vols(vols: Sequence[float], rho) -> DiffusionMatrix:
    """Build a loading matrix from per-firm vols and a correlation.

    ``rho`` is either a scalar (equicorrelation) or a full correlation matrix.
    """
    vols = np.asarray(vols, dtype=float)
    n = vols.size
    r = np.asarray(rho, dtype=float)
    if r.ndim == 0:
        r = np.full((n, n), float(r))
        np.fill_diagonal(r, 1.0)
    return decompose_covariance(r * np.outer(vols, vols))
