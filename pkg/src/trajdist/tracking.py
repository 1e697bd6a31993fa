"""Closed-loop tracking of a planned iLQR trajectory distribution.

Four controllers are provided:

* ``ILQR_FEED`` - the plan's affine feedback law ``u*_t + K_t (x - x*_t)``;
* ``MPC_MEAN`` - short-horizon MPC pulling towards ``x*`` with the fixed
  terminal weight ``Q_T`` at every step;
* ``MPC_MARG`` - short-horizon MPC whose per-step weights are the inverse
  marginal covariances of the plan;
* ``MPC_COND`` - like ``MPC_MARG`` but with references and weights from the
  plan distribution conditioned on the current state.

The MPC costs penalize ``u - u*`` rather than ``u`` itself, so the nominal
plan is an exact fixed point of every controller.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .core import ContractError, DimensionError, FloatArray, TrajDistError, Trajectory
from .costs import GoalCostSpec, TrackingCostSpec, eval_goal_cost
from .gaussian import PRECISION_FLOOR, TrajDist, condition, floored_precision, regression_gain
from .ilqr import ILQRDistribution, ILQRSettings, ILQRSolution, extract_distribution, ilqr_solve
from .systems import SystemModel

DIVERGENCE_LIMIT = 1e3
# Weight on the last step of a MPC window that ends before the plan horizon: "stage" keeps the
# controller's own stage weight, "goal" always uses Q_T.  Q_T is used at the
# global final step either way.
WINDOW_TERMINALS = ("stage", "goal")

DEFAULT_MPC_SETTINGS = ILQRSettings(max_iterations=20, cost_tol_rel=1e-6, grad_tol=1e-6)


class ControllerKind(enum.Enum):
    ILQR_FEED = "ilqr_feed"
    MPC_MEAN = "mpc_mean"
    MPC_MARG = "mpc_marg"
    MPC_COND = "mpc_cond"

    @classmethod
    def parse(cls, name: "str | ControllerKind") -> "ControllerKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ContractError(f"unknown controller {name!r}; choose from {[k.value for k in cls]}") from None


MPC_KINDS = (ControllerKind.MPC_MEAN, ControllerKind.MPC_MARG, ControllerKind.MPC_COND)


class ControllerError(TrajDistError, RuntimeError):
    """The short-horizon solver failed; the message carries its diagnostic."""


@dataclass(frozen=True, eq=False)
class Plan:
    """A converged long-horizon solution together with its distribution."""

    model: SystemModel
    cost: GoalCostSpec
    solution: ILQRSolution
    distribution: ILQRDistribution
    short_horizon: int = 30
    mpc_settings: ILQRSettings = DEFAULT_MPC_SETTINGS
    warm_start: bool = True
    precision_cap: float | None = None
    precision_floor: float = PRECISION_FLOOR
    window_terminal: str = "stage"
    traj_dist: TrajDist = field(init=False, repr=False)
    marginal_weights: FloatArray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not 1 <= self.short_horizon:
            raise ContractError("short horizon must be at least 1")
        if self.short_horizon > self.T:
            raise ContractError(f"short horizon {self.short_horizon} exceeds plan horizon {self.T}")
        if self.window_terminal not in WINDOW_TERMINALS:
            raise ContractError(f"window_terminal must be one of {WINDOW_TERMINALS}, got {self.window_terminal!r}")
        td = TrajDist.from_ilqr(self.distribution)
        object.__setattr__(self, "traj_dist", td)
        QT = self.cost.Q_T
        if self.precision_cap is None:
            object.__setattr__(self, "precision_cap", float(np.linalg.eigvalsh(QT)[-1]))
        W = np.array([floored_precision(self.distribution.state_marginal(t)[1], fallback=QT,
                                        floor=self.precision_floor, max_precision=self.precision_cap)
                      for t in range(self.T + 1)])
        W[self.T] = QT
        W.setflags(write=False)
        object.__setattr__(self, "marginal_weights", W)

    @property
    def T(self) -> int:
        return self.solution.trajectory.T

    @property
    def x_star(self) -> FloatArray:
        return self.solution.trajectory.states

    @property
    def u_star(self) -> FloatArray:
        return self.solution.trajectory.controls

    @property
    def cost_value(self) -> float:
        return eval_goal_cost(self.cost, self.solution.trajectory, self.model)


def make_plan(model: SystemModel, cost: GoalCostSpec, x0, T: int, short_horizon: int = 30,
              settings: ILQRSettings | None = None, mpc_settings: ILQRSettings | None = None,
              u_init=None, warm_start: bool = True, precision_cap: float | None = None,
              precision_floor: float = PRECISION_FLOOR, window_terminal: str = "stage") -> Plan:
    """Solve the long-horizon problem and extract its trajectory distribution."""
    if u_init is None:
        u_init = np.repeat(np.asarray(cost.u_ref)[None], T, axis=0)
    sol = ilqr_solve(model, cost, x0, u_init=u_init, settings=settings)
    dist = extract_distribution(sol, model, cost)
    return Plan(model, cost, sol, dist, short_horizon, mpc_settings or DEFAULT_MPC_SETTINGS, warm_start,
                precision_cap, precision_floor, window_terminal)


@dataclass(frozen=True)
class TickRecord:
    tau: int
    x: FloatArray
    u: FloatArray
    reference: FloatArray | None
    q_min_eig: float
    q_max_eig: float
    inner_iterations: int


class Tracker:
    """Stateful controller: call :meth:`control` once per tick, then :meth:`advance`."""

    def __init__(self, plan: Plan, kind: ControllerKind | str, record: bool = False):
        self.plan = plan
        self.kind = ControllerKind.parse(kind)
        self.tau = 0
        self.record = record
        self.telemetry: list[TickRecord] = []
        self._prev_us: FloatArray | None = None
        self.last_cost: TrackingCostSpec | None = None

    @property
    def short_horizon(self) -> int:
        return self.plan.short_horizon

    def control(self, x) -> FloatArray:
        if self.kind is ControllerKind.ILQR_FEED:
            return control_feedback(self, x)
        return control_mpc(self, x)

    def advance(self) -> None:
        self.tau += 1


def _check_tau(tracker: Tracker) -> None:
    if not 0 <= tracker.tau < tracker.plan.T:
        raise ContractError(f"tracker step {tracker.tau} outside [0, {tracker.plan.T})")


def _state(tracker: Tracker, x) -> FloatArray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (tracker.plan.model.nx,):
        raise DimensionError(f"state must have shape ({tracker.plan.model.nx},)")
    return x


def control_feedback(tracker: Tracker, x) -> FloatArray:
    if tracker.kind is not ControllerKind.ILQR_FEED:
        raise ContractError("control_feedback requires an ILQR_FEED tracker")
    _check_tau(tracker)
    x = _state(tracker, x)
    u = tracker.plan.solution.control(tracker.tau, x)
    if tracker.record:
        tracker.telemetry.append(TickRecord(tracker.tau, x.copy(), u.copy(), None, np.nan, np.nan, 0))
    return u


def tracking_cost(tracker: Tracker, x) -> TrackingCostSpec:
    """Short-horizon cost for the tracker's controller at its current step."""
    plan = tracker.plan
    tau, T = tracker.tau, plan.T
    x = _state(tracker, x)
    end = min(tau + plan.short_horizon, T)
    steps = range(tau + 1, end + 1)
    N = len(steps)
    nx = plan.model.nx
    refs = np.empty((N + 1, nx))
    Qs = np.zeros((N + 1, nx, nx))
    refs[0] = x
    kind = tracker.kind
    if kind is ControllerKind.MPC_MEAN:
        refs[1:] = plan.x_star[tau + 1 : end + 1]
        Qs[1:] = plan.cost.Q_T
    elif kind is ControllerKind.MPC_MARG:
        refs[1:] = plan.x_star[tau + 1 : end + 1]
        Qs[1:] = plan.marginal_weights[tau + 1 : end + 1]
    elif kind is ControllerKind.MPC_COND:
        conds = condition(plan.traj_dist, tau, x, plan.short_horizon)
        for i, g in enumerate(conds, start=1):
            refs[i] = g.mean
            Qs[i] = floored_precision(g.cov, fallback=plan.cost.Q_T, floor=plan.precision_floor,
                                      max_precision=plan.precision_cap)
    else:
        raise ContractError(f"{kind} is not an MPC controller")
    if end == T or plan.window_terminal == "goal":
        Qs[N] = plan.cost.Q_T
    u_refs = plan.u_star[tau:end]
    if kind is ControllerKind.MPC_COND:
        u_refs = conditional_controls(plan, tau, x, end)
    return TrackingCostSpec(refs=refs, Q_t=Qs, R=plan.cost.R, obstacles=plan.cost.obstacles, u_refs=u_refs)


def conditional_controls(plan: Plan, tau: int, x, end: int) -> FloatArray:
    """Mean of ``u_tau .. u_{end-1}`` given ``x_tau = x`` under the plan distribution."""
    dist = plan.distribution
    nx, nu = dist.nx, dist.nu
    s1 = slice(tau * nx, (tau + 1) * nx)
    S11 = dist.cov_x[s1, s1]
    S1u = dist.cov_ux[tau * nu : end * nu, s1].T
    G = regression_gain(S11, S1u)
    mu_u = dist.mean_u[tau * nu : end * nu] + G.T @ (np.asarray(x, dtype=float) - dist.mean_x[s1])
    return mu_u.reshape(end - tau, nu)


def control_mpc(tracker: Tracker, x) -> FloatArray:
    if tracker.kind not in MPC_KINDS:
        raise ContractError("control_mpc requires an MPC tracker")
    _check_tau(tracker)
    plan = tracker.plan
    x = _state(tracker, x)
    spec = tracking_cost(tracker, x)
    tracker.last_cost = spec
    N = spec.N
    tau = tracker.tau
    if plan.warm_start and tracker._prev_us is not None:
        prev = tracker._prev_us[1:]
        u_init = np.concatenate([prev, plan.u_star[tau + prev.shape[0] : tau + N]])[:N]
    else:
        u_init = spec.u_refs
    try:
        sol = ilqr_solve(plan.model, spec, x, u_init=u_init, settings=plan.mpc_settings)
    except TrajDistError as exc:
        raise ControllerError(f"{tracker.kind.value} inner solve failed at step {tau}: {exc}") from exc
    us = sol.trajectory.controls
    tracker._prev_us = us
    u = us[0].copy()
    if tracker.record:
        ev = np.linalg.eigvalsh(spec.Q_t[1])
        tracker.telemetry.append(TickRecord(tau, x.copy(), u.copy(), spec.refs[1].copy(),
                                            float(ev[0]), float(ev[-1]), sol.iterations))
    return u


@dataclass(frozen=True)
class ClosedLoopResult:
    trajectory: Trajectory | None  # None when the run diverged before completion
    states: FloatArray  # realized states up to divergence
    controls: FloatArray
    diverged: bool
    cost: float
    plant_steps: int
    reason: str = ""
    telemetry: tuple[TickRecord, ...] = ()


def _realize(disturbance, plan: Plan, seed) -> FloatArray:
    T, nx = plan.T, plan.model.nx
    if disturbance is None:
        return np.zeros((T, nx))
    if hasattr(disturbance, "realize"):
        return disturbance.realize(plan.model, T, seed)
    d = np.asarray(disturbance, dtype=float)
    if d.shape != (T, nx):
        raise DimensionError(f"disturbance must have shape {(T, nx)}, got {d.shape}")
    return d


def run_closed_loop(plan: Plan, kind: ControllerKind | str, model: SystemModel | None = None,
                    disturbance=None, seed=None, record: bool = False) -> ClosedLoopResult:
    """Simulate ``x_{t+1} = f(x_t, u_t) + d_t`` for the plan's horizon.

    ``disturbance`` is ``None``, a ``(T, nx)`` array, or an object with a
    ``realize(model, T, seed)`` method.  A run is marked diverged when a state
    leaves ``|x|_inf <= DIVERGENCE_LIMIT``, becomes non-finite, or the inner
    MPC solver fails.
    """
    model = plan.model if model is None else model
    if model.nx != plan.model.nx or model.nu != plan.model.nu:
        raise DimensionError("simulation model does not match the plan's dimensions")
    d = _realize(disturbance, plan, seed)
    tracker = Tracker(plan, kind, record=record)
    T = plan.T
    xs = np.empty((T + 1, model.nx))
    us = np.empty((T, model.nu))
    xs[0] = plan.x_star[0]
    diverged, reason, n = False, "", 0
    for t in range(T):
        try:
            u = tracker.control(xs[t])
        except ControllerError as exc:
            diverged, reason = True, str(exc)
            break
        us[t] = u
        with np.errstate(all="ignore"):
            xs[t + 1] = model.step(xs[t], u) + d[t] if np.all(np.isfinite(u)) else np.nan
        n += 1
        tracker.advance()
        if not np.all(np.isfinite(xs[t + 1])) or np.max(np.abs(xs[t + 1])) > DIVERGENCE_LIMIT:
            diverged, reason = True, f"state left the divergence bound at step {t + 1}"
            break
    if diverged:
        return ClosedLoopResult(None, xs[: n + 1].copy(), us[:n].copy(), True, float("inf"), n, reason,
                                tuple(tracker.telemetry))
    traj = Trajectory(xs, us)
    cost = eval_goal_cost(plan.cost, traj, plan.model)
    return ClosedLoopResult(traj, xs, us, False, cost, n, "", tuple(tracker.telemetry))


__all__ = [
    "ControllerKind", "ControllerError", "Plan", "make_plan", "Tracker", "TickRecord", "control_feedback",
    "control_mpc", "tracking_cost", "run_closed_loop", "ClosedLoopResult", "DIVERGENCE_LIMIT",
    "DEFAULT_MPC_SETTINGS", "MPC_KINDS",
]
