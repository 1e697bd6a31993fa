"""Explicit-Euler dynamics, Jacobians and workspace maps for every shipped plant.

Each plant is identified by an integer code and a flat float64 parameter
vector ``p`` (``p[0]`` is always ``dt``).  The dispatching functions at the
bottom are what the solver kernels call, so the whole model catalog compiles
into one cacheable numba module.
"""

import numpy as np

from .._jit import njit

LINEAR = 0
POINT_MASS = 1
PENDULUM = 2
UNICYCLE = 3
BICOPTER = 4
QUADCOPTER = 5
MANIPULATOR = 6


# linear: p = [dt, nx, nu, ws_dim, A.ravel(), B.ravel()]
@njit
def _linear_AB(p):
    nx = int(p[1])
    nu = int(p[2])
    A = p[4 : 4 + nx * nx].copy().reshape((nx, nx))
    B = p[4 + nx * nx : 4 + nx * nx + nx * nu].copy().reshape((nx, nu))
    return A, B


# point mass: p = [dt, dim]; x = (pos, vel), u = acceleration
@njit
def _point_mass_step(x, u, p):
    dt = p[0]
    d = int(p[1])
    out = x.copy()
    for i in range(d):
        out[i] = x[i] + dt * x[d + i]
        out[d + i] = x[d + i] + dt * u[i]
    return out


@njit
def _point_mass_jac(x, u, p):
    dt = p[0]
    d = int(p[1])
    A = np.eye(2 * d)
    B = np.zeros((2 * d, d))
    for i in range(d):
        A[i, d + i] = dt
        B[d + i, i] = dt
    return A, B


# pendulum: p = [dt, m, l, g, b]; theta = 0 hangs down, u is a torque
@njit
def _pendulum_step(x, u, p):
    dt, m, l, g, b = p[0], p[1], p[2], p[3], p[4]
    acc = -(g / l) * np.sin(x[0]) + (u[0] - b * x[1]) / (m * l * l)
    out = np.empty(2)
    out[0] = x[0] + dt * x[1]
    out[1] = x[1] + dt * acc
    return out


@njit
def _pendulum_jac(x, u, p):
    dt, m, l, g, b = p[0], p[1], p[2], p[3], p[4]
    A = np.eye(2)
    A[0, 1] = dt
    A[1, 0] = -dt * (g / l) * np.cos(x[0])
    A[1, 1] = 1.0 - dt * b / (m * l * l)
    B = np.zeros((2, 1))
    B[1, 0] = dt / (m * l * l)
    return A, B


# unicycle: p = [dt]; x = (px, py, heading), u = (forward speed, turn rate)
@njit
def _unicycle_step(x, u, p):
    dt = p[0]
    out = np.empty(3)
    out[0] = x[0] + dt * u[0] * np.cos(x[2])
    out[1] = x[1] + dt * u[0] * np.sin(x[2])
    out[2] = x[2] + dt * u[1]
    return out


@njit
def _unicycle_jac(x, u, p):
    dt = p[0]
    c, s = np.cos(x[2]), np.sin(x[2])
    A = np.eye(3)
    A[0, 2] = -dt * u[0] * s
    A[1, 2] = dt * u[0] * c
    B = np.zeros((3, 2))
    B[0, 0] = dt * c
    B[1, 0] = dt * s
    B[2, 1] = dt
    return A, B


# bicopter: p = [dt, m, arm, inertia, g]; x = (px, pz, th, vx, vz, om), u = rotor thrusts
@njit
def _bicopter_step(x, u, p):
    dt, m, L, J, g = p[0], p[1], p[2], p[3], p[4]
    f = u[0] + u[1]
    s, c = np.sin(x[2]), np.cos(x[2])
    out = np.empty(6)
    out[0] = x[0] + dt * x[3]
    out[1] = x[1] + dt * x[4]
    out[2] = x[2] + dt * x[5]
    out[3] = x[3] - dt * f * s / m
    out[4] = x[4] + dt * (f * c / m - g)
    out[5] = x[5] + dt * L * (u[0] - u[1]) / J
    return out


@njit
def _bicopter_jac(x, u, p):
    dt, m, L, J = p[0], p[1], p[2], p[3]
    f = u[0] + u[1]
    s, c = np.sin(x[2]), np.cos(x[2])
    A = np.eye(6)
    A[0, 3] = dt
    A[1, 4] = dt
    A[2, 5] = dt
    A[3, 2] = -dt * f * c / m
    A[4, 2] = -dt * f * s / m
    B = np.zeros((6, 2))
    B[3, 0] = -dt * s / m
    B[3, 1] = -dt * s / m
    B[4, 0] = dt * c / m
    B[4, 1] = dt * c / m
    B[5, 0] = dt * L / J
    B[5, 1] = -dt * L / J
    return A, B


# quadcopter: p = [dt, m, arm, Ixx, Iyy, Izz, kappa, g]
# x = (pos[3], euler roll/pitch/yaw[3], vel[3], euler rates[3]), u = 4 rotor thrusts
# rotors in "+" layout: 1 at +x, 2 at +y, 3 at -x, 4 at -y
@njit
def _quad_thrust_dir(phi, th, psi):
    cf, sf = np.cos(phi), np.sin(phi)
    ct, st = np.cos(th), np.sin(th)
    cp, sp = np.cos(psi), np.sin(psi)
    z = np.empty(3)
    z[0] = cp * st * cf + sp * sf
    z[1] = sp * st * cf - cp * sf
    z[2] = ct * cf
    D = np.empty((3, 3))
    D[0, 0] = -cp * st * sf + sp * cf
    D[1, 0] = -sp * st * sf - cp * cf
    D[2, 0] = -ct * sf
    D[0, 1] = cp * ct * cf
    D[1, 1] = sp * ct * cf
    D[2, 1] = -st * cf
    D[0, 2] = -sp * st * cf + cp * sf
    D[1, 2] = cp * st * cf + sp * sf
    D[2, 2] = 0.0
    return z, D


@njit
def _quad_mixer(p):
    L, kappa = p[2], p[6]
    M = np.zeros((3, 4))
    M[0, 1] = L
    M[0, 3] = -L
    M[1, 0] = -L
    M[1, 2] = L
    M[2, 0] = kappa
    M[2, 1] = -kappa
    M[2, 2] = kappa
    M[2, 3] = -kappa
    M[0] /= p[3]
    M[1] /= p[4]
    M[2] /= p[5]
    return M


@njit
def _quad_step(x, u, p):
    dt, m, g = p[0], p[1], p[7]
    z, _ = _quad_thrust_dir(x[3], x[4], x[5])
    f = u[0] + u[1] + u[2] + u[3]
    alpha = _quad_mixer(p) @ u
    out = np.empty(12)
    for i in range(6):
        out[i] = x[i] + dt * x[6 + i]
    for i in range(3):
        out[6 + i] = x[6 + i] + dt * f * z[i] / m
        out[9 + i] = x[9 + i] + dt * alpha[i]
    out[8] -= dt * g
    return out


@njit
def _quad_jac(x, u, p):
    dt, m = p[0], p[1]
    z, D = _quad_thrust_dir(x[3], x[4], x[5])
    f = u[0] + u[1] + u[2] + u[3]
    A = np.eye(12)
    for i in range(6):
        A[i, 6 + i] = dt
    for i in range(3):
        for j in range(3):
            A[6 + i, 3 + j] = dt * f * D[i, j] / m
    B = np.zeros((12, 4))
    M = _quad_mixer(p)
    for i in range(3):
        for k in range(4):
            B[6 + i, k] = dt * z[i] / m
            B[9 + i, k] = dt * M[i, k]
    return A, B


# planar n-link arm under joint-acceleration control: p = [dt, n, l_1..l_n]
@njit
def _manip_step(x, u, p):
    dt = p[0]
    n = int(p[1])
    out = x.copy()
    for i in range(n):
        out[i] = x[i] + dt * x[n + i]
        out[n + i] = x[n + i] + dt * u[i]
    return out


@njit
def _manip_jac(x, u, p):
    dt = p[0]
    n = int(p[1])
    A = np.eye(2 * n)
    B = np.zeros((2 * n, n))
    for i in range(n):
        A[i, n + i] = dt
        B[n + i, i] = dt
    return A, B


@njit
def _manip_fk(x, p):
    n = int(p[1])
    pt = np.zeros(2)
    J = np.zeros((2, 2 * n))
    phi = 0.0
    for i in range(n):
        phi += x[i]
        li = p[2 + i]
        c, s = np.cos(phi), np.sin(phi)
        pt[0] += li * c
        pt[1] += li * s
        for j in range(i + 1):
            J[0, j] -= li * s
            J[1, j] += li * c
    return pt, J


@njit
def step(kind, x, u, p):
    if kind == LINEAR:
        A, B = _linear_AB(p)
        return A @ x + B @ u
    elif kind == POINT_MASS:
        return _point_mass_step(x, u, p)
    elif kind == PENDULUM:
        return _pendulum_step(x, u, p)
    elif kind == UNICYCLE:
        return _unicycle_step(x, u, p)
    elif kind == BICOPTER:
        return _bicopter_step(x, u, p)
    elif kind == QUADCOPTER:
        return _quad_step(x, u, p)
    else:
        return _manip_step(x, u, p)


@njit
def jacobians(kind, x, u, p):
    if kind == LINEAR:
        return _linear_AB(p)
    elif kind == POINT_MASS:
        return _point_mass_jac(x, u, p)
    elif kind == PENDULUM:
        return _pendulum_jac(x, u, p)
    elif kind == UNICYCLE:
        return _unicycle_jac(x, u, p)
    elif kind == BICOPTER:
        return _bicopter_jac(x, u, p)
    elif kind == QUADCOPTER:
        return _quad_jac(x, u, p)
    else:
        return _manip_jac(x, u, p)


@njit
def workspace(kind, x, p):
    """Body point used by obstacle and task costs, with its Jacobian in x."""
    nx = x.shape[0]
    if kind == MANIPULATOR:
        return _manip_fk(x, p)
    if kind == PENDULUM:
        l = p[2]
        pt = np.empty(2)
        pt[0] = l * np.sin(x[0])
        pt[1] = -l * np.cos(x[0])
        J = np.zeros((2, nx))
        J[0, 0] = l * np.cos(x[0])
        J[1, 0] = l * np.sin(x[0])
        return pt, J
    if kind == LINEAR:
        d = int(p[3])
    elif kind == POINT_MASS:
        d = int(p[1])
    elif kind == BICOPTER or kind == UNICYCLE:
        d = 2
    else:
        d = 3
    pt = x[:d].copy()
    J = np.zeros((d, nx))
    for i in range(d):
        J[i, i] = 1.0
    return pt, J


@njit
def rollout(kind, p, x0, us):
    T = us.shape[0]
    xs = np.empty((T + 1, x0.shape[0]))
    xs[0] = x0
    for t in range(T):
        xs[t + 1] = step(kind, xs[t], us[t], p)
    return xs


@njit
def linearize_trajectory(kind, p, xs, us):
    T = us.shape[0]
    nx = xs.shape[1]
    nu = us.shape[1]
    A = np.empty((T, nx, nx))
    B = np.empty((T, nx, nu))
    for t in range(T):
        At, Bt = jacobians(kind, xs[t], us[t], p)
        A[t] = At
        B[t] = Bt
    return A, B
