"""Goal-reaching and reference-tracking costs with first and second derivatives.

Both cost families share one convention: every quadratic term carries a factor
1/2, including the obstacle potential ``w * max(0, r - d)**2``.  With that
convention the Hessian of a quadratic cost equals its weight matrix, and the
inverse Hessian is directly the covariance of the associated Gaussian.

No cross term ``c_xu`` is produced; none of the shipped costs couple state and
control.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _cost_kernels as CK
from .core import ContractError, DimensionError, FloatArray, Trajectory, symmetrize
from .systems import SystemModel, linear


@dataclass(frozen=True)
class Obstacle:
    """Sphere (disc in 2-D workspaces) penalized by ``weight * max(0, radius - d)**2``."""

    center: FloatArray
    radius: float
    weight: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(-1))
        if not self.radius > 0:
            raise ContractError(f"obstacle radius must be positive, got {self.radius}")
        if self.weight < 0:
            raise ContractError("obstacle weight must be non-negative")


@dataclass(frozen=True)
class StageCostDerivatives:
    value: float
    cx: FloatArray
    cu: FloatArray
    cxx: FloatArray
    cuu: FloatArray


@dataclass(frozen=True)
class CostArrays:
    """Flat per-step representation consumed by the numba kernels."""

    xref: FloatArray
    Q: FloatArray
    uref: FloatArray
    R: FloatArray
    obs_c: FloatArray
    obs_r: FloatArray
    obs_w: FloatArray
    obs_mask: FloatArray
    task_target: FloatArray
    task_w: FloatArray

    @property
    def N(self) -> int:
        return self.uref.shape[0]

    def kernel_args(self) -> tuple:
        return (self.xref, self.Q, self.uref, self.R, self.obs_c, self.obs_r, self.obs_w,
                self.obs_mask, self.task_target, self.task_w)


def _obstacle_arrays(obstacles: Sequence[Obstacle], d: int):
    if not obstacles:
        return np.zeros((0, d)), np.zeros(0), np.zeros(0)
    c = np.array([o.center for o in obstacles], dtype=float)
    if c.shape[1] != d:
        raise DimensionError(f"obstacle centers have dimension {c.shape[1]}, workspace has {d}")
    return c, np.array([o.radius for o in obstacles]), np.array([o.weight for o in obstacles])


def _psd(M: FloatArray, name: str, strict: bool = False) -> FloatArray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be square, got {M.shape}")
    if np.max(np.abs(M - M.T), initial=0.0) > 1e-9 * max(1.0, np.max(np.abs(M))):
        raise ContractError(f"{name} must be symmetric")
    ev = np.linalg.eigvalsh(symmetrize(M))
    tol = 1e-12 * max(1.0, np.max(np.abs(ev)))
    if (strict and ev.min() <= 0) or ev.min() < -tol:
        raise ContractError(f"{name} must be positive {'definite' if strict else 'semidefinite'}")
    return symmetrize(M)


@dataclass(frozen=True)
class GoalCostSpec:
    """Long-horizon reaching cost.

    ``1/2 * [sum_{t<T} (x_t-g)'Q(x_t-g) + (u_t-u_ref)'R(u_t-u_ref) + l(x_t)
    + task(x_t)] + 1/2 * [(x_T-g)'Q_T(x_T-g) + task_T(x_T)]`` where ``l`` is
    the obstacle field and ``task`` an optional workspace attractor
    ``w * |p(x) - target|**2``.  ``u_ref`` defaults to zero.
    """

    x_goal: FloatArray
    Q: FloatArray
    R: FloatArray
    Q_T: FloatArray
    obstacles: tuple[Obstacle, ...] = ()
    u_ref: FloatArray | None = None
    task_target: FloatArray | None = None
    task_weight: float = 0.0
    task_weight_T: float = 0.0

    def __post_init__(self) -> None:
        x_goal = np.asarray(self.x_goal, dtype=float).reshape(-1)
        nx = x_goal.shape[0]
        Q, Q_T = _psd(self.Q, "Q"), _psd(self.Q_T, "Q_T")
        R = _psd(self.R, "R", strict=True)
        if Q.shape != (nx, nx) or Q_T.shape != (nx, nx):
            raise DimensionError("Q and Q_T must match the goal state dimension")
        nu = R.shape[0]
        u_ref = np.zeros(nu) if self.u_ref is None else np.asarray(self.u_ref, dtype=float).reshape(-1)
        if u_ref.shape != (nu,):
            raise DimensionError("u_ref must match R")
        object.__setattr__(self, "x_goal", x_goal)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "Q_T", Q_T)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "u_ref", u_ref)
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if self.task_target is not None:
            object.__setattr__(self, "task_target", np.asarray(self.task_target, dtype=float).reshape(-1))
        if np.trace(Q) > 0.1 * np.trace(Q_T):
            warnings.warn("running weight Q is not much smaller than terminal weight Q_T", stacklevel=2)

    @property
    def nx(self) -> int:
        return self.x_goal.shape[0]

    @property
    def nu(self) -> int:
        return self.R.shape[0]

    def arrays(self, T: int, model: SystemModel | None = None) -> CostArrays:
        d = _workspace_dim(self.obstacles, self.task_target, model)
        obs_c, obs_r, obs_w = _obstacle_arrays(self.obstacles, d)
        Q = np.repeat(self.Q[None], T + 1, axis=0)
        Q[T] = self.Q_T
        mask = np.ones(T + 1)
        mask[T] = 0.0
        task_w = np.full(T + 1, float(self.task_weight))
        task_w[T] = self.task_weight_T
        target = np.zeros(d) if self.task_target is None else self.task_target
        if self.task_target is None:
            task_w[:] = 0.0
        return CostArrays(
            xref=np.repeat(self.x_goal[None], T + 1, axis=0), Q=Q,
            uref=np.repeat(self.u_ref[None], T, axis=0), R=np.repeat(self.R[None], T, axis=0),
            obs_c=obs_c, obs_r=obs_r, obs_w=obs_w, obs_mask=mask, task_target=target, task_w=task_w,
        )


@dataclass(frozen=True)
class TrackingCostSpec:
    """Short-horizon tracking cost over ``N = len(refs) - 1`` steps.

    ``1/2 * sum_k [(x_k - xbar_k)'Q_k(x_k - xbar_k) + l(x_k)]
    + 1/2 * sum_{k<N} (u_k - ubar_k)'R(u_k - ubar_k)``.  The last reference
    step is weighted like any other stage.  ``u_refs`` defaults to zero.
    """

    refs: FloatArray
    Q_t: FloatArray
    R: FloatArray
    obstacles: tuple[Obstacle, ...] = ()
    u_refs: FloatArray | None = None

    def __post_init__(self) -> None:
        refs = np.asarray(self.refs, dtype=float)
        Q_t = np.asarray(self.Q_t, dtype=float)
        R = np.asarray(self.R, dtype=float)
        if refs.ndim != 2 or refs.shape[0] < 2:
            raise DimensionError("refs must have shape (N+1, nx) with N >= 1")
        N, nx = refs.shape[0] - 1, refs.shape[1]
        if Q_t.shape != (N + 1, nx, nx):
            raise DimensionError(f"Q_t must have shape {(N + 1, nx, nx)}, got {Q_t.shape}")
        if np.max(np.abs(Q_t - Q_t.transpose(0, 2, 1)), initial=0.0) > 1e-9 * max(1.0, np.max(np.abs(Q_t))):
            raise ContractError("Q_t blocks must be symmetric")
        nu = R.shape[0]
        u_refs = np.zeros((N, nu)) if self.u_refs is None else np.asarray(self.u_refs, dtype=float)
        if u_refs.shape != (N, nu):
            raise DimensionError(f"u_refs must have shape {(N, nu)}")
        object.__setattr__(self, "refs", refs)
        object.__setattr__(self, "Q_t", Q_t)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "u_refs", u_refs)
        object.__setattr__(self, "obstacles", tuple(self.obstacles))

    @property
    def N(self) -> int:
        return self.refs.shape[0] - 1

    def arrays(self, T: int | None = None, model: SystemModel | None = None) -> CostArrays:
        N = self.N
        if T is not None and T != N:
            raise DimensionError(f"tracking cost covers {N} steps, not {T}")
        d = _workspace_dim(self.obstacles, None, model)
        obs_c, obs_r, obs_w = _obstacle_arrays(self.obstacles, d)
        return CostArrays(
            xref=self.refs, Q=self.Q_t, uref=self.u_refs, R=np.repeat(self.R[None], N, axis=0),
            obs_c=obs_c, obs_r=obs_r, obs_w=obs_w, obs_mask=np.ones(N + 1),
            task_target=np.zeros(d), task_w=np.zeros(N + 1),
        )


CostSpec = GoalCostSpec | TrackingCostSpec


def _workspace_dim(obstacles, task_target, model) -> int:
    if model is not None:
        return model.workspace_dim
    if obstacles:
        return len(obstacles[0].center)
    if task_target is not None:
        return len(task_target)
    return 2


def _resolve_model(model: SystemModel | None, nx: int, nu: int, d: int) -> SystemModel:
    # Without a plant, the workspace point is the leading `d` state coordinates.
    if model is not None:
        if model.nx != nx or model.nu != nu:
            raise DimensionError(f"cost is {nx}x{nu} but model {model.name} is {model.nx}x{model.nu}")
        return model
    return linear(np.eye(nx), np.zeros((nx, nu)), workspace_dim=min(d, nx))


def _spec_dims(spec) -> tuple[int, int]:
    if isinstance(spec, GoalCostSpec):
        return spec.nx, spec.nu
    return spec.refs.shape[1], spec.R.shape[0]


def _prepare(spec, xs, us, model):
    nx, nu = _spec_dims(spec)
    xs = np.ascontiguousarray(xs, dtype=float)
    us = np.ascontiguousarray(us, dtype=float)
    if xs.ndim != 2 or xs.shape[1] != nx or us.ndim != 2 or us.shape[1] != nu or xs.shape[0] != us.shape[0] + 1:
        raise DimensionError(f"trajectory shapes {xs.shape}/{us.shape} do not match cost dims ({nx}, {nu})")
    arrays = spec.arrays(us.shape[0], model)
    m = _resolve_model(model, nx, nu, arrays.obs_c.shape[1])
    return m, arrays, xs, us


def eval_cost(spec: CostSpec, traj: Trajectory, model: SystemModel | None = None) -> float:
    m, arrays, xs, us = _prepare(spec, traj.states, traj.controls, model)
    return float(CK.total_cost(m.kind, m.pvec, xs, us, *arrays.kernel_args()))


def eval_goal_cost(spec: GoalCostSpec, traj: Trajectory, model: SystemModel | None = None) -> float:
    if not isinstance(spec, GoalCostSpec):
        raise TypeError("eval_goal_cost expects a GoalCostSpec")
    return eval_cost(spec, traj, model)


def stage_values(spec: CostSpec, traj: Trajectory, model: SystemModel | None = None) -> FloatArray:
    """Per-step contributions; entry ``t < T`` includes the control term of step t."""
    m, a, xs, us = _prepare(spec, traj.states, traj.controls, model)
    vals = np.array([
        CK.state_stage_value(m.kind, m.pvec, xs[t], a.xref[t], a.Q[t], a.obs_c, a.obs_r, a.obs_w,
                             a.obs_mask[t], a.task_target, a.task_w[t])
        for t in range(xs.shape[0])
    ])
    du = us - a.uref
    vals[:-1] += 0.5 * np.einsum("ti,tij,tj->t", du, a.R, du)
    return vals


def eval_obstacle_cost(obstacles: Sequence[Obstacle], x, model: SystemModel | None = None) -> float:
    """``sum_k w_k * max(0, r_k - d_k)**2`` at the body point of state ``x``."""
    x = np.asarray(x, dtype=float)
    if not obstacles:
        return 0.0
    if model is None:
        pt = x[: len(obstacles[0].center)]
    else:
        pt = model.workspace_point(x)
    total = 0.0
    for ob in obstacles:
        if ob.center.shape != pt.shape:
            raise DimensionError("obstacle dimension does not match workspace")
        total += ob.weight * max(0.0, ob.radius - float(np.linalg.norm(pt - ob.center))) ** 2
    return total


def quadratize_trajectory(spec: CostSpec, xs, us, model: SystemModel | None = None):
    """Derivative arrays ``(cx, cu, cxx, cuu)`` along a whole trajectory."""
    m, arrays, xs, us = _prepare(spec, xs, us, model)
    return CK.quadratize(m.kind, m.pvec, xs, us, *arrays.kernel_args())


def quadratize(spec: CostSpec, x, u, t: int, T: int | None = None, model: SystemModel | None = None,
               hessian: str = "gauss_newton") -> StageCostDerivatives:
    """Derivatives of stage ``t`` at ``(x, u)``.

    For a :class:`GoalCostSpec` the horizon ``T`` must be given (the terminal
    stage differs).  ``hessian="exact"`` adds the curvature of the obstacle
    distance and of the workspace map that the default Gauss-Newton form drops.
    """
    nx, nu = _spec_dims(spec)
    if isinstance(spec, TrackingCostSpec):
        T = spec.N
    elif T is None:
        raise ContractError("T is required for goal costs")
    if not 0 <= t <= T:
        raise ContractError(f"stage index {t} outside [0, {T}]")
    x = np.asarray(x, dtype=float).reshape(nx)
    u = np.zeros(nu) if u is None else np.asarray(u, dtype=float).reshape(nu)
    arrays = spec.arrays(T, model)
    m = _resolve_model(model, nx, nu, arrays.obs_c.shape[1])

    xs = np.zeros((2, nx))
    xs[0] = x
    us = u[None].copy()
    a = arrays
    # Evaluate through a one-step window so the kernels stay the single source of truth.
    xref = np.vstack([a.xref[t], a.xref[t]])
    Qw = np.stack([a.Q[t], np.zeros((nx, nx))])
    mask = np.array([a.obs_mask[t], 0.0])
    tw = np.array([a.task_w[t], 0.0])
    if t < T:
        uref, Rw = a.uref[t][None], a.R[t][None]
    else:
        uref, Rw = np.zeros((1, nu)), np.zeros((1, nu, nu))
    args = (xref, Qw, uref, Rw, a.obs_c, a.obs_r, a.obs_w, mask, a.task_target, tw)
    cx, cu, cxx, cuu = CK.quadratize(m.kind, m.pvec, xs, us, *args)
    value = CK.total_cost(m.kind, m.pvec, xs, us, *args)
    cxx0 = cxx[0].copy()
    if hessian == "exact":
        cxx0 += _curvature(m, x, a.obs_c, a.obs_r, a.obs_w, mask[0], a.task_target, tw[0])
    elif hessian != "gauss_newton":
        raise ContractError(f"unknown hessian mode {hessian!r}")
    return StageCostDerivatives(value=float(value), cx=cx[0], cu=cu[0], cxx=symmetrize(cxx0), cuu=cuu[0])


def _curvature(model, x, obs_c, obs_r, obs_w, mask, target, task_w) -> FloatArray:
    nx = model.nx
    out = np.zeros((nx, nx))
    pt = model.workspace_point(x)
    J = model.workspace_jacobian(x)
    H = model.workspace_hessians(x)
    if mask > 0:
        for c, r, w in zip(obs_c, obs_r, obs_w):
            diff = pt - c
            d = np.linalg.norm(diff)
            rho = r - d
            if rho > 0 and d > 1e-12:
                n = diff / d
                hess_d = J.T @ ((np.eye(len(n)) - np.outer(n, n)) / d) @ J + np.einsum("i,ijk->jk", n, H)
                out -= mask * w * rho * hess_d
    if task_w > 0:
        out += task_w * np.einsum("i,ijk->jk", pt - target, H)
    return out


__all__ = [
    "Obstacle", "StageCostDerivatives", "CostArrays", "GoalCostSpec", "TrackingCostSpec",
    "eval_cost", "eval_goal_cost", "eval_obstacle_cost", "stage_values", "quadratize",
    "quadratize_trajectory",
]
