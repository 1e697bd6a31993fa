"""Iterative LQR and the Gaussian trajectory distribution around its optimum.

Each iteration linearizes the dynamics and quadratizes the cost along the
current trajectory, solves the resulting LQR subproblem with a Riccati
backward pass, and rolls the corrected controls through the true nonlinear
dynamics with a backtracking line search.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _cost_kernels as CK
from . import _riccati
from .core import (
    DimensionError, DistributionError, FloatArray, NumericError, SolverError, Trajectory,
    build_batch_matrices, symmetrize,
)
from .costs import CostSpec
from .gaussian import GaussianDist, sample
from .lqr import FeedbackPolicy, batch_hessian
from .systems import SystemModel
from .systems._kernels import rollout

log = logging.getLogger(__name__)

# Spectral radius of prod(A_t) above which the state covariance is not trusted.
UNSTABLE_PRODUCT_LIMIT = 1e8


@dataclass(frozen=True)
class ILQRSettings:
    max_iterations: int = 100
    cost_tol_rel: float = 1e-6
    grad_tol: float = 1e-6
    line_search_alphas: tuple[float, ...] = tuple(2.0 ** -i for i in range(11))
    reg_init: float = 1e-6
    reg_min: float = 1e-9
    reg_max: float = 1e6
    reg_scale: float = 10.0

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not (self.cost_tol_rel > 0 and self.grad_tol > 0):
            raise ValueError("tolerances must be positive")
        a = tuple(float(v) for v in self.line_search_alphas)
        if not a or a[0] != 1.0 or any(x <= y for x, y in zip(a, a[1:])) or a[-1] <= 0:
            raise ValueError("line_search_alphas must be strictly descending in (0, 1] starting at 1")
        object.__setattr__(self, "line_search_alphas", a)
        if not (0 <= self.reg_min <= self.reg_init <= self.reg_max) or self.reg_scale <= 1:
            raise ValueError("need 0 <= reg_min <= reg_init <= reg_max and reg_scale > 1")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    cost: float
    alpha: float
    reg: float


@dataclass(frozen=True)
class ILQRSolution:
    trajectory: Trajectory
    policy: FeedbackPolicy
    iterations: int
    final_cost: float
    converged: bool
    initial_cost: float = float("nan")
    cost_history: tuple[float, ...] = ()
    trace: tuple[IterationRecord, ...] = field(default=(), repr=False)
    final_du_inf: float = float("nan")
    stop_reason: str = ""

    def control(self, t: int, x) -> FloatArray:
        """``u*_t + K_t (x - x*_t)``."""
        return self.policy.gains[t] @ np.asarray(x, dtype=float) + self.policy.feedforward[t]


@dataclass(frozen=True)
class ILQRDistribution:
    mean_x: FloatArray  # (T+1)*nx, equals x*
    cov_x: FloatArray
    mean_u: FloatArray  # T*nu, equals u*
    cov_u: FloatArray
    nx: int
    nu: int
    cov_ux: FloatArray | None = field(default=None, repr=False)  # Cov(u, x), (T*nu, (T+1)*nx)

    @property
    def T(self) -> int:
        return self.mean_u.shape[0] // self.nu

    def state_marginal(self, t: int) -> tuple[FloatArray, FloatArray]:
        s = slice(t * self.nx, (t + 1) * self.nx)
        return self.mean_x[s], self.cov_x[s, s]

    def state_std(self) -> FloatArray:
        """Per-step marginal standard deviations, shape ``(T+1, nx)``."""
        return np.sqrt(np.clip(np.diag(self.cov_x), 0.0, None)).reshape(-1, self.nx)


class _Problem:
    """Binds model, cost arrays and initial state for the kernels."""

    def __init__(self, model: SystemModel, spec: CostSpec, x0, T: int):
        self.model = model
        self.arrays = spec.arrays(T, model)
        self.args = self.arrays.kernel_args()
        self.x0 = np.ascontiguousarray(x0, dtype=float)
        if self.x0.shape != (model.nx,):
            raise DimensionError(f"x0 must have shape ({model.nx},)")
        if self.arrays.xref.shape[1] != model.nx or self.arrays.R.shape[1] != model.nu:
            raise DimensionError("cost and model dimensions disagree")

    def cost(self, xs, us) -> float:
        return CK.total_cost(self.model.kind, self.model.pvec, xs, us, *self.args)

    def derivatives(self, xs, us):
        A, B = self.model.linearize_trajectory(xs, us)
        cx, cu, cxx, cuu = CK.quadratize(self.model.kind, self.model.pvec, xs, us, *self.args)
        return A, B, cx, cu, cxx, cuu


def _initial_controls(model: SystemModel, T: int | None, u_init) -> FloatArray:
    if u_init is None:
        if T is None:
            raise DimensionError("need either u_init or a horizon")
        return np.zeros((T, model.nu))
    us = np.array(u_init, dtype=float)
    if us.ndim != 2 or us.shape[1] != model.nu or (T is not None and us.shape[0] != T):
        raise DimensionError(f"u_init must have shape (T, {model.nu}), got {us.shape}")
    if not np.all(np.isfinite(us)):
        raise NumericError("u_init contains non-finite entries")
    return us


def _horizon(spec: CostSpec, T: int | None) -> int | None:
    N = getattr(spec, "N", None)
    if isinstance(N, int):
        return N
    return T


def ilqr_solve(model: SystemModel, cost_spec: CostSpec, x0, u_init=None,
               settings: ILQRSettings | None = None, T: int | None = None) -> ILQRSolution:
    """Minimize the cost from ``x0``; ``T`` is needed only when ``u_init`` is omitted."""
    settings = settings or ILQRSettings()
    us = _initial_controls(model, _horizon(cost_spec, T), u_init)
    T = us.shape[0]
    prob = _Problem(model, cost_spec, x0, T)
    kind, p = model.kind, model.pvec
    alphas = np.asarray(settings.line_search_alphas)

    xs = rollout(kind, p, prob.x0, us)
    if not np.all(np.isfinite(xs)):
        raise NumericError("initial rollout is non-finite (iteration 0)")
    cost = prob.cost(xs, us)
    if not np.isfinite(cost):
        raise NumericError("initial cost is non-finite (iteration 0)")
    initial_cost = cost
    history = [cost]
    trace: list[IterationRecord] = []
    reg = settings.reg_init
    converged = False
    reason = "max_iterations"
    K = np.zeros((T, model.nu, model.nx))
    du_inf = np.inf
    accepted = 0

    for it in range(1, settings.max_iterations + 1):
        A, B, cx, cu, cxx, cuu = prob.derivatives(xs, us)
        K, k, fail = _riccati.backward_pass(A, B, cx, cu, cxx, cuu, reg)
        if fail >= 0:
            reg *= settings.reg_scale
            if reg > settings.reg_max:
                raise SolverError(f"backward pass failed at step {fail}: regularization exhausted (iteration {it})")
            continue
        du_inf = float(np.max(np.abs(_riccati.linear_policy_rollout(A, B, K, k, np.zeros(model.nx)))))
        if du_inf < settings.grad_tol:
            converged, reason = True, "gradient"
            break
        idx, new_xs, new_us, new_cost = _riccati.line_search(kind, p, prob.x0, xs, us, K, k, alphas, cost, *prob.args)
        if idx < 0:
            reg *= settings.reg_scale
            log.debug("line search failed", extra={"iteration": it, "cost": cost, "alpha": 0.0, "reg": reg})
            if reg > settings.reg_max:
                reason = "line_search"
                break
            continue
        accepted += 1
        rel = (cost - new_cost) / max(abs(cost), 1e-300)
        xs, us, cost = new_xs, new_us, new_cost
        history.append(cost)
        rec = IterationRecord(it, cost, float(alphas[idx]), reg)
        trace.append(rec)
        log.debug("ilqr iteration", extra={"iteration": it, "cost": cost, "alpha": rec.alpha, "reg": reg})
        reg = max(reg / settings.reg_scale, settings.reg_min)
        if rel < settings.cost_tol_rel:
            reason = "cost_tol"
            break

    if reason != "gradient":
        # Report the stationarity measure at the returned iterate.
        K, du_inf = _final_subproblem(prob, xs, us, settings)
        converged = du_inf < settings.grad_tol
    traj = Trajectory(xs, us)
    ff = us - np.einsum("tij,tj->ti", K, xs[:-1])
    log.info("ilqr finished", extra={"iterations": accepted, "cost": cost, "reason": reason, "converged": converged})
    return ILQRSolution(
        trajectory=traj, policy=FeedbackPolicy(gains=K, feedforward=ff), iterations=accepted,
        final_cost=float(cost), converged=bool(converged), initial_cost=float(initial_cost),
        cost_history=tuple(history), trace=tuple(trace), final_du_inf=float(du_inf), stop_reason=reason,
    )


def _final_subproblem(prob: _Problem, xs, us, settings: ILQRSettings):
    A, B, cx, cu, cxx, cuu = prob.derivatives(xs, us)
    reg = 0.0
    while True:
        K, k, fail = _riccati.backward_pass(A, B, cx, cu, cxx, cuu, reg)
        if fail < 0:
            du = _riccati.linear_policy_rollout(A, B, K, k, np.zeros(prob.model.nx))
            return K, float(np.max(np.abs(du)))
        reg = settings.reg_init if reg == 0.0 else reg * settings.reg_scale
        if reg > settings.reg_max:
            return K, float("inf")


def extract_distribution(solution: ILQRSolution, model: SystemModel, cost_spec: CostSpec) -> ILQRDistribution:
    """Gaussian over trajectories from the LQR subproblem at the optimum.

    The control covariance is the inverse Hessian of the reduced (linearized
    dynamics, quadratized cost) objective; the state covariance is its image
    under the lifted input map.
    """
    if not solution.converged:
        warnings.warn("extracting a distribution from a non-converged iLQR solution", stacklevel=2)
    traj = solution.trajectory
    xs, us = traj.states, traj.controls
    T = us.shape[0]
    prob = _Problem(model, cost_spec, xs[0], T)
    A, B, _, _, cxx, cuu = prob.derivatives(np.ascontiguousarray(xs), np.ascontiguousarray(us))
    _check_stability(A)
    for t in range(T):
        try:
            np.linalg.cholesky(symmetrize(cuu[t]))
        except np.linalg.LinAlgError:
            raise DistributionError(f"control weight at step {t} is not positive definite") from None
    S = build_batch_matrices(A, B)
    H = batch_hessian(S, cxx, cuu)
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        raise DistributionError("reduced control Hessian is not positive definite") from None
    Linv = np.linalg.solve(L, np.eye(H.shape[0]))
    cov_u = symmetrize(Linv.T @ Linv)
    cov_ux = cov_u @ S.Su.T
    cov_x = symmetrize(S.Su @ cov_ux)
    cov_x[: model.nx, :] = 0.0
    cov_x[:, : model.nx] = 0.0
    return ILQRDistribution(
        mean_x=xs.reshape(-1).copy(), cov_x=cov_x, mean_u=us.reshape(-1).copy(), cov_u=cov_u,
        nx=model.nx, nu=model.nu, cov_ux=cov_ux,
    )


def sample_trajectories(dist: ILQRDistribution, count: int, rng_seed) -> tuple[FloatArray, FloatArray]:
    """Draw ``count`` (states, controls) pairs, shapes ``(count, T+1, nx)`` and ``(count, T, nu)``.

    Controls are drawn from their full-rank marginal and mapped to states
    through the lifted linear dynamics, so ``x_0`` is reproduced exactly and
    every state path is consistent with its controls.
    """
    if dist.cov_ux is None:
        raise DistributionError("distribution carries no state-control covariance")
    du = sample(GaussianDist(np.zeros_like(dist.mean_u), dist.cov_u), count, rng_seed)
    G = np.linalg.solve(dist.cov_u, dist.cov_ux)  # lifted input map, transposed
    xs = dist.mean_x + du @ G
    us = dist.mean_u + du
    return xs.reshape(count, dist.T + 1, dist.nx), us.reshape(count, dist.T, dist.nu)


def _check_stability(A: FloatArray) -> None:
    # Accumulate with per-step normalization so the product itself cannot overflow.
    P = np.eye(A.shape[1])
    log_scale = 0.0
    for At in A:
        P = At @ P
        s = np.max(np.abs(P))
        if not np.isfinite(s):
            raise DistributionError("linearized dynamics product is non-finite")
        if s > 0:
            P /= s
            log_scale += np.log(s)
    rho = np.max(np.abs(np.linalg.eigvals(P)))
    log_rho = log_scale + (np.log(rho) if rho > 0 else -np.inf)
    if log_rho > np.log(UNSTABLE_PRODUCT_LIMIT):
        raise DistributionError(
            f"linearized dynamics are strongly unstable along the trajectory "
            f"(spectral radius of the transition product ~ 1e{log_rho / np.log(10):.1f}); "
            "the state covariance would be numerically meaningless"
        )


__all__ = [
    "ILQRSettings", "ILQRSolution", "ILQRDistribution", "IterationRecord", "ilqr_solve",
    "extract_distribution", "sample_trajectories", "UNSTABLE_PRODUCT_LIMIT",
]
