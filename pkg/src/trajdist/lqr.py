"""Finite-horizon time-varying LQR: batch least squares and Riccati recursion.

The problem is

    1/2 sum_{t<=T} x_t' Q_t x_t + q_t' x_t  +  1/2 sum_{t<T} u_t' R_t u_t + r_t' u_t
    s.t.  x_{t+1} = A_t x_t + B_t u_t,  x_0 given.

Eliminating the states with the lifted dynamics ``x = Sx x0 + Su u`` gives a
quadratic in ``u`` whose minimizer is the control mean and whose inverse
Hessian is the control covariance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _riccati
from .core import (
    BatchMatrices, DimensionError, FloatArray, SolverError, build_batch_matrices, symmetrize,
    JITTER_MAX, JITTER_START,
)


@dataclass(frozen=True)
class LQRProblem:
    A_seq: FloatArray  # (T, nx, nx)
    B_seq: FloatArray  # (T, nx, nu)
    Q_blocks: FloatArray  # (T+1, nx, nx)
    R_blocks: FloatArray  # (T, nu, nu)
    x0: FloatArray
    q: FloatArray | None = None  # (T+1, nx)
    r: FloatArray | None = None  # (T, nu)

    def __post_init__(self) -> None:
        A = np.ascontiguousarray(self.A_seq, dtype=float)
        B = np.ascontiguousarray(self.B_seq, dtype=float)
        Q = np.ascontiguousarray(self.Q_blocks, dtype=float)
        R = np.ascontiguousarray(self.R_blocks, dtype=float)
        x0 = np.ascontiguousarray(self.x0, dtype=float)
        if A.ndim != 3 or B.ndim != 3 or A.shape[1] != A.shape[2]:
            raise DimensionError("A_seq must be (T, nx, nx) and B_seq (T, nx, nu)")
        T, nx, nu = A.shape[0], A.shape[1], B.shape[2]
        if B.shape[:2] != (T, nx):
            raise DimensionError(f"B_seq shape {B.shape} inconsistent with A_seq {A.shape}")
        if Q.shape != (T + 1, nx, nx):
            raise DimensionError(f"Q_blocks must have shape {(T + 1, nx, nx)}, got {Q.shape}")
        if R.shape != (T, nu, nu):
            raise DimensionError(f"R_blocks must have shape {(T, nu, nu)}, got {R.shape}")
        if x0.shape != (nx,):
            raise DimensionError("x0 has the wrong dimension")
        q = np.zeros((T + 1, nx)) if self.q is None else np.ascontiguousarray(self.q, dtype=float)
        r = np.zeros((T, nu)) if self.r is None else np.ascontiguousarray(self.r, dtype=float)
        if q.shape != (T + 1, nx) or r.shape != (T, nu):
            raise DimensionError("linear cost terms have the wrong shape")
        for name, val in (("A_seq", A), ("B_seq", B), ("Q_blocks", Q), ("R_blocks", R), ("x0", x0),
                          ("q", q), ("r", r)):
            object.__setattr__(self, name, val)

    @property
    def T(self) -> int:
        return self.A_seq.shape[0]

    @property
    def nx(self) -> int:
        return self.A_seq.shape[1]

    @property
    def nu(self) -> int:
        return self.B_seq.shape[2]

    def batch(self) -> BatchMatrices:
        return build_batch_matrices(self.A_seq, self.B_seq)

    def cost(self, u) -> float:
        """Reduced cost ``u -> C(Sx x0 + Su u, u)``."""
        S = self.batch()
        u = np.asarray(u, dtype=float).reshape(-1)
        xs = (S.Sx @ self.x0 + S.Su @ u).reshape(self.T + 1, self.nx)
        us = u.reshape(self.T, self.nu)
        return float(
            0.5 * np.einsum("ti,tij,tj->", xs, self.Q_blocks, xs) + np.sum(self.q * xs)
            + 0.5 * np.einsum("ti,tij,tj->", us, self.R_blocks, us) + np.sum(self.r * us)
        )


@dataclass(frozen=True)
class ControlDistribution:
    mu_u: FloatArray
    Sigma_u: FloatArray


@dataclass(frozen=True)
class FeedbackPolicy:
    """Affine time-varying law ``u_t = K_t x_t + k_t``."""

    gains: FloatArray  # (T, nu, nx)
    feedforward: FloatArray  # (T, nu)

    def rollout_open_loop(self, prob: LQRProblem) -> FloatArray:
        return _riccati.linear_policy_rollout(prob.A_seq, prob.B_seq, self.gains, self.feedforward, prob.x0)


def block_diag(blocks) -> FloatArray:
    return scipy.linalg.block_diag(*blocks)


def batch_hessian(S: BatchMatrices, Q_blocks, R_blocks) -> FloatArray:
    # Su' Qs Su without materializing Qs: Qs is block diagonal.
    nx = S.nx
    T1 = Q_blocks.shape[0]
    QSu = np.einsum("tij,tjk->tik", Q_blocks, S.Su.reshape(T1, nx, -1)).reshape(T1 * nx, -1)
    return symmetrize(S.Su.T @ QSu + block_diag(R_blocks))


def _factor(H: FloatArray):
    n = H.shape[0]
    eps = 0.0
    level = max(np.trace(H) / n, 1e-300)
    while True:
        try:
            return scipy.linalg.cho_factor(H + eps * level * np.eye(n), lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            eps = JITTER_START if eps == 0.0 else eps * 10.0
            if eps > JITTER_MAX * (1 + 1e-12):
                raise SolverError("batch LQR Hessian is not positive definite after jitter escalation") from None


def solve_batch(prob: LQRProblem) -> ControlDistribution:
    """Control mean (gradient root) and covariance (inverse Hessian)."""
    S = prob.batch()
    H = batch_hessian(S, prob.Q_blocks, prob.R_blocks)
    nx, T1 = prob.nx, prob.T + 1
    Qx0 = np.einsum("tij,tj->ti", prob.Q_blocks, (S.Sx @ prob.x0).reshape(T1, nx)).reshape(-1)
    g = S.Su.T @ (Qx0 + prob.q.reshape(-1)) + prob.r.reshape(-1)
    factor = _factor(H)
    mu = -scipy.linalg.cho_solve(factor, g, check_finite=False)
    Sigma = scipy.linalg.cho_solve(factor, np.eye(H.shape[0]), check_finite=False)
    return ControlDistribution(mu_u=mu, Sigma_u=symmetrize(Sigma))


def state_distribution(prob: LQRProblem, ctrl: ControlDistribution) -> tuple[FloatArray, FloatArray]:
    """Push the control Gaussian through ``x = Sx x0 + Su u``."""
    S = prob.batch()
    if ctrl.mu_u.shape != (S.Su.shape[1],):
        raise DimensionError("control distribution does not match the problem")
    mean = S.Sx @ prob.x0 + S.Su @ ctrl.mu_u
    cov = symmetrize(S.Su @ ctrl.Sigma_u @ S.Su.T)
    cov[: prob.nx, :] = 0.0
    cov[:, : prob.nx] = 0.0
    return mean, cov


def solve_riccati(prob: LQRProblem, reg: float = 0.0) -> FeedbackPolicy:
    """Backward recursion; the returned law acts on absolute states."""
    reg_level = reg
    while True:
        K, k, fail = _riccati.backward_pass(
            prob.A_seq, prob.B_seq, prob.q, prob.r, prob.Q_blocks, prob.R_blocks, reg_level
        )
        if fail < 0:
            return FeedbackPolicy(gains=K, feedforward=k)
        scale = max(np.trace(prob.R_blocks[fail]) / prob.nu, 1e-300)
        reg_level = JITTER_START * scale if reg_level == 0.0 else reg_level * 10.0
        if reg_level > JITTER_MAX * scale * (1 + 1e-12):
            raise SolverError(f"control Hessian at step {fail} is not positive definite")


__all__ = [
    "LQRProblem", "ControlDistribution", "FeedbackPolicy", "solve_batch", "state_distribution",
    "solve_riccati", "batch_hessian",
]
