"""Stage-cost evaluation and Gauss-Newton quadratization kernels.

A cost over an ``N``-step window is described by flat arrays:

* ``xref (N+1, nx)``, ``Q (N+1, nx, nx)`` - state tracking terms,
* ``uref (N, nu)``, ``R (N, nu, nu)`` - control terms,
* ``obs_c (K, d)``, ``obs_r (K,)``, ``obs_w (K,)`` - spherical obstacles,
  gated per step by ``obs_mask (N+1,)``,
* ``task_target (d,)`` with per-step weights ``task_w (N+1,)`` - a
  workspace attractor (end-effector reaching).

Every term carries a factor 1/2, so ``cxx``/``cuu`` are the Hessian blocks.
"""

import numpy as np

from ._jit import njit
from .systems._kernels import workspace


@njit
def state_stage_value(kind, p, x, xr, Q, obs_c, obs_r, obs_w, mask, task_target, task_w):
    dx = x - xr
    v = dx @ (Q @ dx)
    if mask > 0.0 or task_w > 0.0:
        pt, _ = workspace(kind, x, p)
        if mask > 0.0:
            for k in range(obs_r.shape[0]):
                diff = pt - obs_c[k]
                rho = obs_r[k] - np.sqrt(diff @ diff)
                if rho > 0.0:
                    v += mask * obs_w[k] * rho * rho
        if task_w > 0.0:
            e = pt - task_target
            v += task_w * (e @ e)
    return 0.5 * v


@njit
def total_cost(kind, p, xs, us, xref, Q, uref, R, obs_c, obs_r, obs_w, obs_mask, task_target, task_w):
    N = us.shape[0]
    c = 0.0
    for t in range(N + 1):
        c += state_stage_value(kind, p, xs[t], xref[t], Q[t], obs_c, obs_r, obs_w,
                               obs_mask[t], task_target, task_w[t])
    for t in range(N):
        du = us[t] - uref[t]
        c += 0.5 * (du @ (R[t] @ du))
    return c


@njit
def quadratize(kind, p, xs, us, xref, Q, uref, R, obs_c, obs_r, obs_w, obs_mask, task_target, task_w):
    N = us.shape[0]
    nx = xs.shape[1]
    nu = us.shape[1]
    cx = np.empty((N + 1, nx))
    cxx = np.empty((N + 1, nx, nx))
    cu = np.empty((N, nu))
    cuu = np.empty((N, nu, nu))
    for t in range(N + 1):
        x = xs[t]
        cx[t] = Q[t] @ (x - xref[t])
        cxx[t] = Q[t]
        m = obs_mask[t]
        tw = task_w[t]
        if m > 0.0 or tw > 0.0:
            pt, J = workspace(kind, x, p)
            if m > 0.0:
                for k in range(obs_r.shape[0]):
                    diff = pt - obs_c[k]
                    d = np.sqrt(diff @ diff)
                    rho = obs_r[k] - d
                    if rho > 0.0 and d > 1e-12:
                        g = (diff / d) @ J  # gradient of the distance
                        w = m * obs_w[k]
                        cx[t] -= w * rho * g
                        cxx[t] += w * np.outer(g, g)
            if tw > 0.0:
                e = pt - task_target
                cx[t] += tw * (J.T @ e)
                cxx[t] += tw * (J.T @ J)
    for t in range(N):
        cu[t] = R[t] @ (us[t] - uref[t])
        cuu[t] = R[t]
    return cx, cu, cxx, cuu
