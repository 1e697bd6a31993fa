"""Gaussian algebra on stacked trajectory distributions.

Trajectory Gaussians from iLQR are structurally singular (the initial state
is deterministic, and underactuated directions carry little variance), so
every inverse here goes through a regularized symmetric solve.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    ContractError, DimensionError, DistributionError, FloatArray, NumericError, symmetric_solve, symmetrize,
)

# Relative jitter added to a conditioning block whose smallest eigenvalue is
# below this fraction of its mean eigenvalue.
CONDITION_JITTER = 1e-8
# Eigenvalue floor (relative to trace/n) applied before turning a covariance
# into a tracking weight.
PRECISION_FLOOR = 1e-6


@dataclass(frozen=True)
class GaussianDist:
    mean: FloatArray
    cov: FloatArray

    def __post_init__(self) -> None:
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.array(self.cov, dtype=float)
        n = mean.shape[0]
        if cov.shape != (n, n):
            raise DimensionError(f"covariance must be {n}x{n}, got {cov.shape}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise NumericError("Gaussian parameters must be finite")
        scale = max(float(np.max(np.abs(cov), initial=0.0)), 1.0)
        if np.max(np.abs(cov - cov.T), initial=0.0) > 1e-9 * scale:
            raise ContractError("covariance is not symmetric")
        cov = symmetrize(cov)
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def is_psd(self, rel_tol: float = 1e-9) -> bool:
        if self.dim == 0:
            return True
        ev = np.linalg.eigvalsh(self.cov)
        return bool(ev.min() >= -rel_tol * max(np.abs(ev).max(), 1e-300))


@dataclass(frozen=True)
class TrajDist:
    """Joint Gaussian over ``T+1`` stacked states of dimension ``nx``."""

    base: GaussianDist
    nx: int
    T: int

    def __post_init__(self) -> None:
        if self.nx < 1 or self.T < 0:
            raise ContractError("nx must be positive and T non-negative")
        if self.base.dim != self.nx * (self.T + 1):
            raise DimensionError(f"base dimension {self.base.dim} != nx*(T+1) = {self.nx * (self.T + 1)}")

    @classmethod
    def from_arrays(cls, mean, cov, nx: int) -> "TrajDist":
        base = GaussianDist(mean, cov)
        if base.dim % nx:
            raise DimensionError("stacked dimension is not a multiple of nx")
        return cls(base, nx, base.dim // nx - 1)

    @classmethod
    def from_ilqr(cls, dist) -> "TrajDist":
        return cls.from_arrays(dist.mean_x, dist.cov_x, dist.nx)

    def _slice(self, t: int) -> slice:
        return slice(t * self.nx, (t + 1) * self.nx)

    def means(self) -> FloatArray:
        return self.base.mean.reshape(self.T + 1, self.nx)


def product(dists: Sequence[GaussianDist]) -> GaussianDist:
    """Fuse Gaussians by adding precisions: the minimizer of the summed quadratic forms."""
    dists = list(dists)
    if not dists:
        raise ContractError("product of an empty list")
    n = dists[0].dim
    if any(d.dim != n for d in dists):
        raise DimensionError("all Gaussians must have the same dimension")
    if len(dists) == 1:
        return dists[0]
    W = np.zeros((n, n))
    h = np.zeros(n)
    for d in dists:
        Wk = symmetrize(symmetric_solve(d.cov, np.eye(n)))
        W += Wk
        h += Wk @ d.mean
    try:
        L = np.linalg.cholesky(symmetrize(W))
    except np.linalg.LinAlgError:
        raise DistributionError("fused precision is singular") from None
    Linv = np.linalg.solve(L, np.eye(n))
    cov = Linv.T @ Linv
    return GaussianDist(cov @ h, symmetrize(cov))


def marginal(dist: TrajDist, t: int) -> GaussianDist:
    if not 0 <= t <= dist.T:
        raise IndexError(f"step {t} outside [0, {dist.T}]")
    s = dist._slice(t)
    return GaussianDist(dist.base.mean[s], dist.base.cov[s, s])


def window(tau: int, horizon: int, T: int) -> range:
    """Steps following ``tau`` inside the (clipped) short horizon."""
    if horizon < 1:
        raise ContractError("horizon must be at least 1")
    if not 0 <= tau < T:
        raise IndexError(f"tau={tau} outside [0, {T})")
    return range(tau + 1, min(tau + horizon, T) + 1)


def regression_gain(S11: FloatArray, S12: FloatArray) -> FloatArray:
    """``Sigma_11^{-1} Sigma_12`` with jitter when ``Sigma_11`` is near singular."""
    n = S11.shape[0]
    S11 = symmetrize(S11)
    ev = np.linalg.eigvalsh(S11)
    level = ev.sum() / n
    jitter = 0.0
    if not level > 0:
        jitter = CONDITION_JITTER
    elif ev[0] < CONDITION_JITTER * level:
        jitter = CONDITION_JITTER
    return symmetric_solve(S11, S12, min_jitter=jitter)


def condition(dist: TrajDist, tau: int, x_tau, horizon: int) -> list[GaussianDist]:
    """Per-step conditionals ``p(x_t | x_tau)`` for the steps after ``tau`` in the window.

    ``mu_c = mu_2 + S21 S11^{-1} (x_tau - mu_1)``,
    ``S_c = S22 - S21 S11^{-1} S12``, evaluated block by block.
    """
    steps = window(tau, horizon, dist.T)
    x_tau = np.asarray(x_tau, dtype=float).reshape(-1)
    if x_tau.shape != (dist.nx,):
        raise DimensionError(f"x_tau must have shape ({dist.nx},)")
    if not np.all(np.isfinite(x_tau)):
        raise NumericError("x_tau must be finite")
    mean, cov = dist.base.mean, dist.base.cov
    s1 = dist._slice(tau)
    rest = slice(steps[0] * dist.nx, (steps[-1] + 1) * dist.nx)
    S11 = cov[s1, s1]
    S12 = cov[s1, rest]
    G = regression_gain(S11, S12)  # (nx, m)
    mu_c = mean[rest] + G.T @ (x_tau - mean[s1])
    out = []
    nx = dist.nx
    for i, t in enumerate(steps):
        b = slice(i * nx, (i + 1) * nx)
        st = dist._slice(t)
        Sc = cov[st, st] - S12[:, b].T @ G[:, b]
        out.append(GaussianDist(mu_c[b], symmetrize(Sc)))
    return out


def condition_joint(dist: GaussianDist, n_obs: int, x_obs) -> GaussianDist:
    """Condition a joint Gaussian on its first ``n_obs`` coordinates."""
    x_obs = np.asarray(x_obs, dtype=float).reshape(-1)
    if not 0 < n_obs < dist.dim or x_obs.shape != (n_obs,):
        raise DimensionError("observation block must be a proper leading block")
    m, C = dist.mean, dist.cov
    G = regression_gain(C[:n_obs, :n_obs], C[:n_obs, n_obs:])
    return GaussianDist(m[n_obs:] + G.T @ (x_obs - m[:n_obs]), symmetrize(C[n_obs:, n_obs:] - C[:n_obs, n_obs:].T @ G))


def psd_sqrt(cov: FloatArray, tol: float = 1e-6) -> FloatArray:
    """``L`` with ``L L' = cov``; tolerant of rank deficiency."""
    cov = symmetrize(np.asarray(cov, dtype=float))
    w, V = np.linalg.eigh(cov)
    norm = max(np.abs(w).max(initial=0.0), 1e-300)
    if w.size and w.min() < -tol * norm:
        raise DistributionError(f"covariance has a negative eigenvalue {w.min():.3e}")
    return V * np.sqrt(np.clip(w, 0.0, None))


def sample(dist: GaussianDist, count: int, rng_seed) -> FloatArray:
    """``count`` draws, shape ``(count, dim)``; deterministic in ``rng_seed``."""
    if count < 1:
        raise ContractError("count must be at least 1")
    L = psd_sqrt(dist.cov)
    rng = np.random.default_rng(rng_seed)
    z = rng.standard_normal((count, dist.dim))
    return dist.mean + z @ L.T


def floored_precision(cov: FloatArray, fallback: FloatArray | None = None,
                      floor: float = PRECISION_FLOOR, max_precision: float = np.inf) -> FloatArray:
    """Inverse covariance with eigenvalues floored at ``floor * trace/n``.

    ``max_precision`` additionally caps the eigenvalues of the result.  A
    zero covariance has no scale; ``fallback`` is returned instead.
    """
    cov = symmetrize(np.asarray(cov, dtype=float))
    n = cov.shape[0]
    level = np.trace(cov) / n
    if not level > 0:
        if fallback is None:
            raise DistributionError("zero covariance has no precision and no fallback was given")
        return np.array(fallback, dtype=float)
    w, V = np.linalg.eigh(cov)
    w = np.maximum(w, max(floor * level, 1.0 / max_precision))
    return symmetrize((V / w) @ V.T)


__all__ = [
    "GaussianDist", "TrajDist", "product", "marginal", "condition", "condition_joint", "sample",
    "psd_sqrt", "floored_precision", "window", "regression_gain",
]
