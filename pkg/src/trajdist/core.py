"""Trajectory containers, batch (lifted) dynamics matrices and shared numerics.

Stacked vectors are time-major throughout the package: ``x = (x_0, ..., x_T)``
and ``u = (u_0, ..., u_{T-1})``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import numpy.typing as npt
import scipy.linalg

FloatArray = npt.NDArray[np.float64]


class TrajDistError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(TrajDistError, ValueError):
    """Array shapes are inconsistent with each other or with a model."""


class NumericError(TrajDistError, ArithmeticError):
    """Non-finite values were encountered."""


class ContractError(TrajDistError, ValueError):
    """An input violates a documented precondition (symmetry, ordering...)."""


class SolverError(TrajDistError, RuntimeError):
    """An optimizer could not make progress (e.g. regularization exhausted)."""


class DistributionError(TrajDistError, RuntimeError):
    """A trajectory distribution could not be formed."""


def as_finite(a, name: str = "array") -> FloatArray:
    arr = np.asarray(a, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class TimeGrid:
    horizon_steps: int
    dt: float

    def __post_init__(self) -> None:
        if int(self.horizon_steps) != self.horizon_steps or self.horizon_steps < 1:
            raise ContractError(f"horizon_steps must be a positive integer, got {self.horizon_steps}")
        if not self.dt > 0:
            raise ContractError(f"dt must be positive, got {self.dt}")

    @property
    def T(self) -> int:
        return int(self.horizon_steps)

    def times(self) -> FloatArray:
        return self.dt * np.arange(self.T + 1)


@dataclass(frozen=True)
class Trajectory:
    """States ``(T+1, nx)`` paired with controls ``(T, nu)``."""

    states: FloatArray
    controls: FloatArray

    def __post_init__(self) -> None:
        xs = np.array(self.states, dtype=np.float64)
        us = np.array(self.controls, dtype=np.float64)
        if xs.ndim != 2 or us.ndim != 2:
            raise DimensionError("states and controls must be 2-D arrays")
        if xs.shape[0] != us.shape[0] + 1:
            raise DimensionError(
                f"expected len(states) == len(controls) + 1, got {xs.shape[0]} and {us.shape[0]}"
            )
        xs.setflags(write=False)
        us.setflags(write=False)
        object.__setattr__(self, "states", xs)
        object.__setattr__(self, "controls", us)

    @property
    def T(self) -> int:
        return self.controls.shape[0]

    @property
    def nx(self) -> int:
        return self.states.shape[1]

    @property
    def nu(self) -> int:
        return self.controls.shape[1]

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.states)) and np.all(np.isfinite(self.controls)))

    def stacked_states(self) -> FloatArray:
        return self.states.reshape(-1)

    def stacked_controls(self) -> FloatArray:
        return self.controls.reshape(-1)


@dataclass(frozen=True)
class BatchMatrices:
    """Lifted dynamics ``x = Sx x0 + Su u`` for a linear time-varying system."""

    Sx: FloatArray
    Su: FloatArray
    nx: int
    nu: int

    @property
    def T(self) -> int:
        return self.Su.shape[1] // self.nu

    def predict(self, x0, u) -> FloatArray:
        return self.Sx @ np.asarray(x0, dtype=float) + self.Su @ np.asarray(u, dtype=float).reshape(-1)


def build_batch_matrices(A_seq: Sequence[FloatArray], B_seq: Sequence[FloatArray]) -> BatchMatrices:
    """Stack the transition matrices of ``x_{t+1} = A_t x_t + B_t u_t``.

    Block row ``t`` of ``Sx`` is ``A_{t-1} ... A_0`` and block ``(t, j)`` of
    ``Su`` is ``A_{t-1} ... A_{j+1} B_j`` for ``j < t`` (zero otherwise).
    """
    A = np.asarray(A_seq, dtype=np.float64)
    B = np.asarray(B_seq, dtype=np.float64)
    if A.ndim != 3 or B.ndim != 3:
        raise DimensionError("A_seq and B_seq must be sequences of matrices")
    T, nx, nx2 = A.shape
    if nx != nx2:
        raise DimensionError(f"A_t must be square, got {nx}x{nx2}")
    if B.shape[0] != T or B.shape[1] != nx:
        raise DimensionError(f"B_seq shape {B.shape} incompatible with A_seq shape {A.shape}")
    if T < 1:
        raise DimensionError("need at least one time step")
    nu = B.shape[2]

    Sx = np.zeros((nx * (T + 1), nx))
    Su = np.zeros((nx * (T + 1), nu * T))
    Sx[:nx] = np.eye(nx)
    for t in range(T):
        rows, nxt = slice(t * nx, (t + 1) * nx), slice((t + 1) * nx, (t + 2) * nx)
        Sx[nxt] = A[t] @ Sx[rows]
        if t > 0:
            Su[nxt, : t * nu] = A[t] @ Su[rows, : t * nu]
        Su[nxt, t * nu : (t + 1) * nu] = B[t]
    return BatchMatrices(Sx=Sx, Su=Su, nx=nx, nu=nu)


def symmetrize(M: FloatArray) -> FloatArray:
    return 0.5 * (M + M.T)


JITTER_START = 1e-8
JITTER_MAX = 1e-2


def symmetric_solve(M, rhs, min_jitter: float = 0.0, symmetry_tol: float = 1e-9) -> FloatArray:
    """Solve ``M X = rhs`` for symmetric ``M`` through a Cholesky factorization.

    If ``M`` is not numerically positive definite, ``eps * trace(M)/n * I`` is
    added with ``eps`` escalating from 1e-8 by factors of ten up to 1e-2.
    ``min_jitter`` forces that relative regularization from the start, which
    is how rank-deficient covariance blocks are inverted.
    """
    M = np.asarray(M, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"M must be square, got shape {M.shape}")
    if rhs.shape[0] != M.shape[0]:
        raise DimensionError(f"rhs has {rhs.shape[0]} rows, M has {M.shape[0]}")
    if not (np.all(np.isfinite(M)) and np.all(np.isfinite(rhs))):
        raise NumericError("symmetric_solve received non-finite entries")
    scale = np.max(np.abs(M)) if M.size else 0.0
    if np.max(np.abs(M - M.T), initial=0.0) > symmetry_tol * max(scale, 1.0):
        raise ContractError("matrix is not symmetric within tolerance")
    M = symmetrize(M)
    n = M.shape[0]
    level = np.trace(M) / n
    if not level > 0:
        level = max(scale, 1.0)

    eps = min_jitter
    while True:
        try:
            factor = scipy.linalg.cho_factor(M + eps * level * np.eye(n), lower=True, check_finite=False)
            return scipy.linalg.cho_solve(factor, rhs, check_finite=False)
        except np.linalg.LinAlgError:
            eps = JITTER_START if eps < JITTER_START else eps * 10.0
            if eps > JITTER_MAX * (1 + 1e-12):
                raise SolverError("matrix is not positive definite even after jitter escalation") from None


def is_positive_definite(M) -> bool:
    try:
        np.linalg.cholesky(symmetrize(np.asarray(M, dtype=np.float64)))
        return True
    except np.linalg.LinAlgError:
        return False


def block(M: FloatArray, i: int, j: int, rows: int, cols: int | None = None) -> FloatArray:
    cols = rows if cols is None else cols
    return M[i * rows : (i + 1) * rows, j * cols : (j + 1) * cols]
