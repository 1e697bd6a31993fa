"""Backward Riccati recursion and forward passes.

These are the inner loops of both the LQR dynamic-programming solver and
iLQR; they run once per iteration and once per line-search trial.
"""

import numpy as np

from ._cost_kernels import total_cost
from ._jit import njit
from .systems._kernels import step


@njit
def backward_pass(A, B, cx, cu, cxx, cuu, reg):
    """Time-varying LQR in deviation form with linear cost terms.

    Returns ``(K, k, fail)``; ``fail`` is the first step (counting backwards)
    whose regularized control Hessian is not positive definite, or -1.
    """
    T = A.shape[0]
    nx = A.shape[1]
    nu = B.shape[2]
    K = np.zeros((T, nu, nx))
    k = np.zeros((T, nu))
    Vx = cx[T].copy()
    Vxx = cxx[T].copy()
    eye = np.eye(nu)
    rhs = np.empty((nu, nx + 1))
    for t in range(T - 1, -1, -1):
        At = A[t]
        Bt = B[t]
        VA = Vxx @ At
        VB = Vxx @ Bt
        Qx = cx[t] + At.T @ Vx
        Qu = cu[t] + Bt.T @ Vx
        Qxx = cxx[t] + At.T @ VA
        Quu = cuu[t] + Bt.T @ VB
        Qux = Bt.T @ VA
        Quu_reg = 0.5 * (Quu + Quu.T) + reg * eye
        try:
            np.linalg.cholesky(Quu_reg)
        except Exception:
            return K, k, t
        rhs[:, 0] = Qu
        rhs[:, 1:] = Qux
        sol = np.linalg.solve(Quu_reg, rhs)
        kt = -sol[:, 0]
        Kt = -sol[:, 1:]
        k[t] = kt
        K[t] = Kt
        QuuK = Quu @ Kt
        Vx = Qx + Kt.T @ (Quu @ kt) + Kt.T @ Qu + Qux.T @ kt
        Vxx = Qxx + Kt.T @ QuuK + Kt.T @ Qux + Qux.T @ Kt
        Vxx = 0.5 * (Vxx + Vxx.T)
    return K, k, -1


@njit
def linear_policy_rollout(A, B, K, k, dx0):
    """Roll the affine policy ``du = k + K dx`` through the linear dynamics."""
    T = A.shape[0]
    nu = B.shape[2]
    du = np.empty((T, nu))
    dx = dx0.copy()
    for t in range(T):
        du[t] = k[t] + K[t] @ dx
        dx = A[t] @ dx + B[t] @ du[t]
    return du


@njit
def forward_pass(kind, p, x0, xs, us, K, k, alpha):
    T = us.shape[0]
    new_xs = np.empty_like(xs)
    new_us = np.empty_like(us)
    new_xs[0] = x0
    for t in range(T):
        new_us[t] = us[t] + alpha * k[t] + K[t] @ (new_xs[t] - xs[t])
        new_xs[t + 1] = step(kind, new_xs[t], new_us[t], p)
    return new_xs, new_us


@njit
def line_search(kind, p, x0, xs, us, K, k, alphas, cost0,
                xref, Q, uref, R, obs_c, obs_r, obs_w, obs_mask, task_target, task_w):
    """Backtrack over ``alphas`` and accept the first strict cost decrease.

    Returns ``(index, xs, us, cost)``; ``index`` is -1 when no step decreased
    the cost (the inputs are returned unchanged).
    """
    for i in range(alphas.shape[0]):
        new_xs, new_us = forward_pass(kind, p, x0, xs, us, K, k, alphas[i])
        c = total_cost(kind, p, new_xs, new_us, xref, Q, uref, R, obs_c, obs_r, obs_w,
                       obs_mask, task_target, task_w)
        if np.isfinite(c) and c < cost0:
            return i, new_xs, new_us, c
    return -1, xs, us, cost0
