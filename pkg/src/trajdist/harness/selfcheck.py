"""Fast numerical self-tests run by ``trajdist check``.

Each check compares two independent computations of the same quantity:
analytic derivatives against central differences, the batch LQR solution
against the Riccati recursion, the control covariance against a numerically
differentiated reduced-cost Hessian, block conditioning against a hand
formula, and jitted kernels against their pure-numpy source.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .. import _jit
from ..costs import GoalCostSpec, Obstacle, quadratize
from ..gaussian import GaussianDist, condition_joint
from ..lqr import LQRProblem, solve_batch, solve_riccati
from ..systems import MODEL_NAMES, _kernels, hover_thrust, make_model


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    error: float
    tolerance: float


def random_lqr(rng: np.random.Generator, nx: int, nu: int, T: int, linear_terms: bool = True) -> LQRProblem:
    """Random stable-ish LTV problem with PSD state and PD control weights."""
    A = np.eye(nx) + 0.3 * rng.standard_normal((T, nx, nx))
    B = rng.standard_normal((T, nx, nu))
    Lq = rng.standard_normal((T + 1, nx, nx))
    Q = np.einsum("tij,tkj->tik", Lq, Lq) / nx
    Lr = rng.standard_normal((T, nu, nu))
    R = np.einsum("tij,tkj->tik", Lr, Lr) / nu + 0.5 * np.eye(nu)
    q = rng.standard_normal((T + 1, nx)) if linear_terms else None
    r = rng.standard_normal((T, nu)) if linear_terms else None
    return LQRProblem(A, B, Q, R, rng.standard_normal(nx), q, r)


def central_jacobian(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h))
    return np.stack(cols, axis=-1)


def _rel(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


def check_dynamics_jacobians(seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    err = 0.0
    for name in MODEL_NAMES:
        m = make_model(name)
        x = 0.3 * rng.standard_normal(m.nx)
        u = 0.3 * rng.standard_normal(m.nu)
        J = m.linearize(x, u)
        err = max(err, _rel(J.A, central_jacobian(lambda z: m.step(z, u), x)))
        err = max(err, _rel(J.B, central_jacobian(lambda z: m.step(x, z), u)))
    return CheckResult("dynamics_jacobians", err < 1e-6, err, 1e-6)


def check_cost_gradient(seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    m = make_model("quadcopter")
    spec = GoalCostSpec(
        x_goal=np.r_[1.0, 1.0, 1.0, np.zeros(9)], Q=0.1 * np.eye(12), R=0.1 * np.eye(4), Q_T=np.eye(12),
        obstacles=(Obstacle(center=[0.4, 0.3, 0.2], radius=0.6, weight=50.0),), u_ref=hover_thrust(m),
    )
    x = np.r_[0.3, 0.2, 0.1, 0.1 * rng.standard_normal(9)]
    u = hover_thrust(m) + 0.1 * rng.standard_normal(4)
    d = quadratize(spec, x, u, 3, T=10, model=m)
    gx = central_jacobian(lambda z: np.array(quadratize(spec, z, u, 3, T=10, model=m).value), x)
    gu = central_jacobian(lambda z: np.array(quadratize(spec, x, z, 3, T=10, model=m).value), u)
    err = max(_rel(d.cx, gx), _rel(d.cu, gu))
    return CheckResult("cost_gradient", err < 1e-6, err, 1e-6)


def check_batch_riccati(seed: int = 0, count: int = 10) -> CheckResult:
    rng = np.random.default_rng(seed)
    err = 0.0
    for _ in range(count):
        prob = random_lqr(rng, int(rng.integers(1, 5)), int(rng.integers(1, 3)), int(rng.integers(1, 21)))
        mu = solve_batch(prob).mu_u
        u = solve_riccati(prob).rollout_open_loop(prob).reshape(-1)
        err = max(err, float(np.max(np.abs(mu - u))))
    return CheckResult("batch_vs_riccati", err < 1e-8, err, 1e-8)


def check_covariance_hessian(seed: int = 0, count: int = 3) -> CheckResult:
    rng = np.random.default_rng(seed)
    err = 0.0
    for _ in range(count):
        prob = random_lqr(rng, 2, 1, 5)
        Sigma = solve_batch(prob).Sigma_u
        n = Sigma.shape[0]
        grad = lambda z: central_jacobian(lambda w: np.array(prob.cost(w)), z, h=1e-4)
        H = central_jacobian(grad, np.zeros(n), h=1e-4)
        Hinv = np.linalg.inv(0.5 * (H + H.T))
        err = max(err, float(np.max(np.abs(Sigma - Hinv)) / np.max(np.abs(Hinv))))
    return CheckResult("covariance_inverse_hessian", err < 1e-4, err, 1e-4)


def check_conditioning() -> CheckResult:
    # [x; y] with var(x)=2, var(y)=3, cov=1: mean(y|x) = my + (x-mx)/2, var = 3 - 1/2.
    g = GaussianDist([1.0, -1.0], [[2.0, 1.0], [1.0, 3.0]])
    c = condition_joint(g, 1, [2.0])
    err = max(abs(c.mean[0] - (-0.5)), abs(c.cov[0, 0] - 2.5))
    return CheckResult("gaussian_conditioning", err < 1e-10, float(err), 1e-10)


def check_jit_parity(seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    err = 0.0
    for name in MODEL_NAMES:
        m = make_model(name)
        x = 0.3 * rng.standard_normal(m.nx)
        u = 0.3 * rng.standard_normal(m.nu)
        fast = _kernels.step(m.kind, x, u, m.pvec)
        slow = _jit.python_impl(_kernels.step)(m.kind, x, u, m.pvec)
        err = max(err, _rel(fast, slow))
    return CheckResult("jit_vs_python", err < 1e-12, err, 1e-12)


CHECKS: tuple[Callable[[], CheckResult], ...] = (
    check_dynamics_jacobians, check_cost_gradient, check_batch_riccati, check_covariance_hessian,
    check_conditioning, check_jit_parity,
)


def run_checks() -> list[CheckResult]:
    out = []
    for check in CHECKS:
        try:
            out.append(check())
        except Exception as exc:  # a crashing check is a failing check
            out.append(CheckResult(f"{check.__name__[6:]} ({type(exc).__name__}: {exc})", False, float("nan"), 0.0))
    return out


__all__ = ["CheckResult", "CHECKS", "run_checks", "random_lqr", "central_jacobian"]
