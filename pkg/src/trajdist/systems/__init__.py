"""Discrete-time plants ``x_{t+1} = f(x_t, u_t)`` with analytic Jacobians.

All nonlinear plants are integrated with explicit Euler at the model's ``dt``.
Models are immutable; the numerical work happens in :mod:`._kernels`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from ..core import DimensionError, FloatArray, NumericError, ContractError, Trajectory
from . import _kernels as K

DEFAULT_DT = 0.05
GRAVITY = 9.81


@dataclass(frozen=True)
class Jacobians:
    A: FloatArray
    B: FloatArray


@dataclass(frozen=True, eq=False)
class SystemModel:
    name: str
    kind: int
    nx: int
    nu: int
    dt: float
    parameters: Mapping[str, float]
    pvec: FloatArray = field(repr=False)
    velocity_indices: tuple[int, ...] = ()
    workspace_dim: int = 2

    def __post_init__(self) -> None:
        if self.nx < 1 or self.nu < 1:
            raise ContractError("nx and nu must be at least 1")
        if not self.dt > 0:
            raise ContractError("dt must be positive")
        pvec = np.ascontiguousarray(self.pvec, dtype=np.float64)
        pvec.setflags(write=False)
        object.__setattr__(self, "pvec", pvec)
        object.__setattr__(self, "parameters", MappingProxyType(dict(self.parameters)))

    # -- checks -------------------------------------------------------------
    def _vec(self, v, n: int, what: str) -> FloatArray:
        arr = np.ascontiguousarray(v, dtype=np.float64)
        if arr.shape != (n,):
            raise DimensionError(f"{self.name}: {what} must have shape ({n},), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NumericError(f"{self.name}: {what} contains non-finite entries")
        return arr

    # -- dynamics -----------------------------------------------------------
    def step(self, x, u) -> FloatArray:
        x = self._vec(x, self.nx, "state")
        u = self._vec(u, self.nu, "control")
        return K.step(self.kind, x, u, self.pvec)

    def linearize(self, x, u) -> Jacobians:
        x = self._vec(x, self.nx, "state")
        u = self._vec(u, self.nu, "control")
        A, B = K.jacobians(self.kind, x, u, self.pvec)
        return Jacobians(A=A, B=B)

    def rollout(self, x0, controls) -> Trajectory:
        x0 = self._vec(x0, self.nx, "x0")
        us = np.ascontiguousarray(controls, dtype=np.float64)
        if us.ndim != 2 or us.shape[1] != self.nu or us.shape[0] < 1:
            raise DimensionError(f"{self.name}: controls must have shape (T>=1, {self.nu}), got {us.shape}")
        bad = ~np.all(np.isfinite(us), axis=1)
        if bad.any():
            raise NumericError(f"{self.name}: non-finite control at step {int(np.argmax(bad))}")
        xs = K.rollout(self.kind, self.pvec, x0, us)
        bad = ~np.all(np.isfinite(xs), axis=1)
        if bad.any():
            raise NumericError(f"{self.name}: rollout became non-finite at step {int(np.argmax(bad))}")
        return Trajectory(xs, us)

    def linearize_trajectory(self, xs, us) -> tuple[FloatArray, FloatArray]:
        return K.linearize_trajectory(
            self.kind, self.pvec, np.ascontiguousarray(xs, dtype=float), np.ascontiguousarray(us, dtype=float)
        )

    # -- workspace (obstacle / task point) ------------------------------------
    def workspace_point(self, x) -> FloatArray:
        return K.workspace(self.kind, self._vec(x, self.nx, "state"), self.pvec)[0]

    def workspace_jacobian(self, x) -> FloatArray:
        return K.workspace(self.kind, self._vec(x, self.nx, "state"), self.pvec)[1]

    def workspace_hessians(self, x) -> FloatArray:
        """Second derivatives of the workspace point, shape ``(d, nx, nx)``."""
        x = self._vec(x, self.nx, "state")
        H = np.zeros((self.workspace_dim, self.nx, self.nx))
        if self.kind == K.MANIPULATOR:
            n = self.nx // 2
            lengths = self.pvec[2 : 2 + n]
            phis = np.cumsum(x[:n])
            for a in range(n):
                for b in range(n):
                    i0 = max(a, b)
                    H[0, a, b] = -np.sum(lengths[i0:] * np.cos(phis[i0:]))
                    H[1, a, b] = -np.sum(lengths[i0:] * np.sin(phis[i0:]))
        elif self.kind == K.PENDULUM:
            l = self.parameters["length"]
            H[0, 0, 0] = -l * np.sin(x[0])
            H[1, 0, 0] = l * np.cos(x[0])
        return H


# --------------------------------------------------------------------------
# catalog
# --------------------------------------------------------------------------


def linear(A, B, dt: float = DEFAULT_DT, workspace_dim: int | None = None, velocity_indices=()) -> SystemModel:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or B.ndim != 2 or B.shape[0] != A.shape[0]:
        raise DimensionError(f"incompatible A {A.shape} and B {B.shape}")
    nx, nu = B.shape
    d = min(nx, 2) if workspace_dim is None else int(workspace_dim)
    pvec = np.concatenate([[dt, nx, nu, d], A.ravel(), B.ravel()])
    return SystemModel("linear", K.LINEAR, nx, nu, dt, {}, pvec, tuple(velocity_indices), d)


def point_mass(dim: int = 2, dt: float = DEFAULT_DT) -> SystemModel:
    dim = int(dim)
    if dim not in (1, 2, 3):
        raise ContractError("point mass dimension must be 1, 2 or 3")
    return SystemModel(
        "point_mass", K.POINT_MASS, 2 * dim, dim, dt, {"dim": dim},
        np.array([dt, dim], dtype=float), tuple(range(dim, 2 * dim)), dim,
    )


def pendulum(dt: float = DEFAULT_DT, mass: float = 1.0, length: float = 1.0,
             gravity: float = GRAVITY, damping: float = 0.0) -> SystemModel:
    _positive(mass=mass, length=length, gravity=gravity)
    params = {"mass": mass, "length": length, "gravity": gravity, "damping": damping}
    return SystemModel(
        "pendulum", K.PENDULUM, 2, 1, dt, params,
        np.array([dt, mass, length, gravity, damping]), (1,), 2,
    )


def unicycle(dt: float = DEFAULT_DT) -> SystemModel:
    return SystemModel("unicycle", K.UNICYCLE, 3, 2, dt, {}, np.array([dt]), (), 2)


def bicopter(dt: float = DEFAULT_DT, mass: float = 2.5, arm_length: float = 0.2,
             inertia: float = 1.2, gravity: float = GRAVITY) -> SystemModel:
    _positive(mass=mass, arm_length=arm_length, inertia=inertia, gravity=gravity)
    params = {"mass": mass, "arm_length": arm_length, "inertia": inertia, "gravity": gravity}
    return SystemModel(
        "bicopter", K.BICOPTER, 6, 2, dt, params,
        np.array([dt, mass, arm_length, inertia, gravity]), (3, 4, 5), 2,
    )


def quadcopter(dt: float = DEFAULT_DT, mass: float = 1.0, arm_length: float = 0.2,
               inertia: Sequence[float] = (0.01, 0.01, 0.02), torque_coeff: float = 0.02,
               gravity: float = GRAVITY) -> SystemModel:
    Ixx, Iyy, Izz = (float(v) for v in inertia)
    _positive(mass=mass, arm_length=arm_length, Ixx=Ixx, Iyy=Iyy, Izz=Izz,
              torque_coeff=torque_coeff, gravity=gravity)
    params = {"mass": mass, "arm_length": arm_length, "inertia": (Ixx, Iyy, Izz),
              "torque_coeff": torque_coeff, "gravity": gravity}
    pvec = np.array([dt, mass, arm_length, Ixx, Iyy, Izz, torque_coeff, gravity])
    return SystemModel("quadcopter", K.QUADCOPTER, 12, 4, dt, params, pvec, tuple(range(6, 12)), 3)


def manipulator(n_links: int = 7, dt: float = DEFAULT_DT, link_lengths: Sequence[float] | None = None) -> SystemModel:
    n = int(n_links)
    if n < 1:
        raise ContractError("manipulator needs at least one link")
    lengths = np.full(n, 1.0 / n) if link_lengths is None else np.asarray(link_lengths, dtype=float)
    if lengths.shape != (n,):
        raise DimensionError(f"expected {n} link lengths, got {lengths.shape}")
    _positive(**{f"link_{i}": v for i, v in enumerate(lengths)})
    params = {"n_links": n, "link_lengths": tuple(float(v) for v in lengths)}
    return SystemModel(
        "manipulator", K.MANIPULATOR, 2 * n, n, dt, params,
        np.concatenate([[dt, n], lengths]), tuple(range(n, 2 * n)), 2,
    )


def hover_thrust(model: SystemModel) -> FloatArray:
    """Per-rotor thrust that balances gravity for the multirotor plants."""
    m, g = model.parameters["mass"], model.parameters["gravity"]
    return np.full(model.nu, m * g / model.nu)


_FACTORIES = {
    "point_mass": point_mass,
    "pendulum": pendulum,
    "unicycle": unicycle,
    "bicopter": bicopter,
    "quadcopter": quadcopter,
    "manipulator": manipulator,
}

MODEL_NAMES = tuple(_FACTORIES)


def make_model(name: str, dt: float = DEFAULT_DT, **params) -> SystemModel:
    try:
        factory = _FACTORIES[name]
    except KeyError:
        raise ContractError(f"unknown system {name!r}; choose one of {sorted(_FACTORIES)}") from None
    if name == "quadcopter" and "inertia" in params:
        params["inertia"] = tuple(params["inertia"])
    return factory(dt=dt, **params)


def _positive(**values: float) -> None:
    for key, val in values.items():
        if not val > 0:
            raise ContractError(f"parameter {key} must be strictly positive, got {val}")


__all__ = [
    "Jacobians", "SystemModel", "linear", "point_mass", "pendulum", "unicycle", "bicopter",
    "quadcopter", "manipulator", "hover_thrust", "make_model", "MODEL_NAMES",
]
