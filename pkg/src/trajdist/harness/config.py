"""YAML configuration: schema, validation and construction of plans.

See ``docs/config.md`` for the documented schema.  Every key is validated;
unknown keys are rejected so typos surface as usage errors.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from ..core import ContractError, TrajDistError
from ..costs import GoalCostSpec, Obstacle
from ..gaussian import PRECISION_FLOOR
from ..ilqr import ILQRSettings
from ..systems import MODEL_NAMES, SystemModel, hover_thrust, make_model
from ..tracking import WINDOW_TERMINALS, Plan, make_plan
from .disturbance import (
    DEFAULT_MAGNITUDES, DEFAULT_TV_WINDOW, LEVELS, DisturbanceKind, DisturbanceSpec, Level,
)

SCHEMA_VERSION = 1
PRESETS = ("quadcopter", "manipulator", "point_mass", "pendulum", "unicycle", "bicopter")


class ConfigError(TrajDistError, ValueError):
    """Malformed configuration (reported as a usage error)."""


# Allowed keys per section; the doc-lint test checks each one is documented.
SCHEMA: dict[str, tuple[str, ...]] = {
    "": ("schema_version", "system", "task", "horizons", "solver", "mpc", "disturbance", "experiment", "output"),
    "system": ("name", "dt", "params"),
    "task": ("x0", "goal", "Q", "Q_T", "R", "u_ref", "obstacles", "task_target", "task_weight", "task_weight_T"),
    "obstacle": ("center", "radius", "weight"),
    "horizons": ("T", "T_s"),
    "solver": ("max_iterations", "cost_tol_rel", "grad_tol"),
    "mpc": ("max_iterations", "cost_tol_rel", "grad_tol", "warm_start", "precision_floor", "precision_cap",
            "window_terminal"),
    "disturbance": ("kinds", "levels", "magnitudes", "impulse_onset", "time_varying_window", "smoothing"),
    "experiment": ("seeds", "master_seed", "jobs"),
    "output": ("dir",),
}


def _check_keys(section: str, data: Mapping[str, Any]) -> None:
    if not isinstance(data, Mapping):
        raise ConfigError(f"section {section or '<root>'!r} must be a mapping")
    unknown = sorted(set(data) - set(SCHEMA[section]))
    if unknown:
        where = f"section {section!r}" if section else "top level"
        raise ConfigError(f"unknown key(s) {unknown} in {where}")


def _weight(value, n: int, name: str) -> np.ndarray:
    """Scalar -> s*I, list of n -> diag, n x n nested list -> matrix."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return float(arr) * np.eye(n)
    if arr.shape == (n,):
        return np.diag(arr)
    if arr.shape == (n, n):
        return arr
    raise ConfigError(f"{name} must be a scalar, a length-{n} diagonal or an {n}x{n} matrix")


def _vector(value, n: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.shape != (n,):
        raise ConfigError(f"{name} must have {n} entries, got {arr.size}")
    return arr


@dataclass(frozen=True)
class DisturbanceConfig:
    kinds: tuple[DisturbanceKind, ...]
    levels: tuple[Level, ...]
    magnitudes: Mapping[DisturbanceKind, tuple[float, float, float]]
    impulse_onset: tuple[int, int] | None = None
    time_varying_window: tuple[int, int] = DEFAULT_TV_WINDOW
    smoothing: float = 0.3

    def spec(self, kind: DisturbanceKind | str, level: Level | str) -> DisturbanceSpec:
        kind, level = DisturbanceKind.parse(kind), Level.parse(level)
        mags = self.magnitudes.get(kind)
        if mags is None:
            raise ConfigError(f"no magnitudes configured for {kind.value} disturbances")
        mag = mags[LEVELS.index(level)]
        if kind is DisturbanceKind.IMPULSE:
            return DisturbanceSpec(kind, level, mag, onset_range=self.impulse_onset, smoothing=self.smoothing)
        return DisturbanceSpec(kind, level, mag, window=self.time_varying_window, smoothing=self.smoothing)


@dataclass(frozen=True)
class Config:
    raw: Mapping[str, Any] = field(repr=False)
    model: SystemModel
    cost: GoalCostSpec
    x0: np.ndarray
    T: int
    T_s: int
    solver: ILQRSettings
    mpc: ILQRSettings
    warm_start: bool
    precision_floor: float
    precision_cap: float | None
    window_terminal: str
    disturbance: DisturbanceConfig
    seeds: int
    master_seed: int
    jobs: int
    output_dir: Path

    @property
    def system(self) -> str:
        return self.model.name

    def build_plan(self) -> Plan:
        return make_plan(
            self.model, self.cost, self.x0, self.T, short_horizon=self.T_s, settings=self.solver,
            mpc_settings=self.mpc, warm_start=self.warm_start, precision_cap=self.precision_cap,
            precision_floor=self.precision_floor, window_terminal=self.window_terminal,
        )

    def with_overrides(self, **changes) -> "Config":
        """Re-parse with top-level section overrides, e.g. ``experiment={"seeds": 5}``."""
        raw = copy.deepcopy(dict(self.raw))
        for section, values in changes.items():
            if isinstance(values, Mapping):
                raw.setdefault(section, {})
                raw[section].update(values)
            else:
                raw[section] = values
        return parse_config(raw)


def _settings(data: Mapping[str, Any], section: str, defaults: ILQRSettings) -> ILQRSettings:
    keys = ("max_iterations", "cost_tol_rel", "grad_tol")
    try:
        return ILQRSettings(**{**{k: getattr(defaults, k) for k in keys},
                               **{k: data[k] for k in keys if k in data}})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {section} settings: {exc}") from None


def parse_config(raw: Mapping[str, Any]) -> Config:
    """Validate a parsed YAML document and build the typed configuration."""
    _check_keys("", raw)
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    try:
        return _parse(raw)
    except ConfigError:
        raise
    except (TrajDistError, ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def _parse(raw: Mapping[str, Any]) -> Config:
    sys_cfg = raw.get("system") or {}
    _check_keys("system", sys_cfg)
    name = sys_cfg.get("name")
    if name not in MODEL_NAMES:
        raise ConfigError(f"system.name must be one of {list(MODEL_NAMES)}, got {name!r}")
    params = dict(sys_cfg.get("params") or {})
    model = make_model(name, dt=float(sys_cfg.get("dt", 0.05)), **params)
    nx, nu = model.nx, model.nu

    task = raw.get("task") or {}
    _check_keys("task", task)
    for key in ("x0", "goal", "Q", "Q_T", "R"):
        if key not in task:
            raise ConfigError(f"task.{key} is required")
    x0 = _vector(task["x0"], nx, "task.x0")
    goal = _vector(task["goal"], nx, "task.goal")
    u_ref_raw = task.get("u_ref", "zero")
    if u_ref_raw == "hover":
        u_ref = hover_thrust(model)
    elif u_ref_raw == "zero":
        u_ref = np.zeros(nu)
    else:
        u_ref = _vector(u_ref_raw, nu, "task.u_ref")
    obstacles = []
    for i, ob in enumerate(task.get("obstacles") or []):
        _check_keys("obstacle", ob)
        obstacles.append(Obstacle(center=ob["center"], radius=ob["radius"], weight=ob.get("weight", 1.0)))
    cost = GoalCostSpec(
        x_goal=goal, Q=_weight(task["Q"], nx, "task.Q"), R=_weight(task["R"], nu, "task.R"),
        Q_T=_weight(task["Q_T"], nx, "task.Q_T"), obstacles=tuple(obstacles), u_ref=u_ref,
        task_target=task.get("task_target"), task_weight=float(task.get("task_weight", 0.0)),
        task_weight_T=float(task.get("task_weight_T", 0.0)),
    )

    hz = raw.get("horizons") or {}
    _check_keys("horizons", hz)
    T, T_s = int(hz.get("T", 150)), int(hz.get("T_s", 30))
    if T < 1 or not 1 <= T_s <= T:
        raise ConfigError("horizons need T >= 1 and 1 <= T_s <= T")

    solver_raw = raw.get("solver") or {}
    _check_keys("solver", solver_raw)
    solver = _settings(solver_raw, "solver", ILQRSettings(max_iterations=500, cost_tol_rel=1e-12))
    mpc_raw = raw.get("mpc") or {}
    _check_keys("mpc", mpc_raw)
    mpc = _settings(mpc_raw, "mpc", ILQRSettings(max_iterations=20))
    floor = float(mpc_raw.get("precision_floor", PRECISION_FLOOR))
    if not floor > 0:
        raise ConfigError("mpc.precision_floor must be positive")
    cap = mpc_raw.get("precision_cap")
    cap = None if cap is None else float(cap)
    if cap is not None and not cap > 0:
        raise ConfigError("mpc.precision_cap must be positive")

    window_terminal = mpc_raw.get("window_terminal", "stage")
    if window_terminal not in WINDOW_TERMINALS:
        raise ConfigError(f"mpc.window_terminal must be one of {list(WINDOW_TERMINALS)}")

    dist = _disturbance(raw.get("disturbance") or {}, name)

    exp = raw.get("experiment") or {}
    _check_keys("experiment", exp)
    seeds, master, jobs = int(exp.get("seeds", 50)), int(exp.get("master_seed", 0)), int(exp.get("jobs", 1))
    if seeds < 1 or jobs < 1 or master < 0:
        raise ConfigError("experiment needs seeds >= 1, jobs >= 1 and master_seed >= 0")
    out = raw.get("output") or {}
    _check_keys("output", out)
    return Config(
        raw=copy.deepcopy(dict(raw)), model=model, cost=cost, x0=x0, T=T, T_s=T_s, solver=solver, mpc=mpc,
        warm_start=bool(mpc_raw.get("warm_start", True)), precision_floor=floor, precision_cap=cap,
        window_terminal=window_terminal,
        disturbance=dist, seeds=seeds, master_seed=master, jobs=jobs, output_dir=Path(out.get("dir", "results")),
    )


def _disturbance(data: Mapping[str, Any], system: str) -> DisturbanceConfig:
    _check_keys("disturbance", data)
    kinds = tuple(DisturbanceKind.parse(k) for k in data.get("kinds", ["impulse", "time_varying"]))
    levels = tuple(Level.parse(v) for v in data.get("levels", ["small", "medium", "large"]))
    mags: dict[DisturbanceKind, tuple[float, float, float]] = {}
    for kind in DisturbanceKind:
        if (system, kind) in DEFAULT_MAGNITUDES:
            mags[kind] = DEFAULT_MAGNITUDES[(system, kind)]
    for key, vals in (data.get("magnitudes") or {}).items():
        vals = tuple(float(v) for v in vals)
        if len(vals) != 3 or min(vals) <= 0:
            raise ConfigError("disturbance.magnitudes entries need three positive values (small, medium, large)")
        mags[DisturbanceKind.parse(key)] = vals
    onset = data.get("impulse_onset")
    window = tuple(data.get("time_varying_window", DEFAULT_TV_WINDOW))
    if len(window) != 2 or (onset is not None and len(onset) != 2):
        raise ConfigError("disturbance windows are [start, end] pairs")
    return DisturbanceConfig(
        kinds=kinds, levels=levels, magnitudes=mags, impulse_onset=None if onset is None else tuple(onset),
        time_varying_window=window, smoothing=float(data.get("smoothing", 0.3)),
    )


def load_config(path) -> Config:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: malformed YAML: {exc}") from None
    if not isinstance(raw, Mapping):
        raise ConfigError(f"{path}: top level must be a mapping")
    return parse_config(raw)


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {list(PRESETS)}")
    return resources.files("trajdist.presets").joinpath(f"{name}.yaml").read_text()


def load_preset(name: str) -> Config:
    return parse_config(yaml.safe_load(preset_text(name)))


def resolve_config(ref: str) -> Config:
    """A path to a YAML file, or the name of a bundled preset."""
    if ref in PRESETS and not Path(ref).exists():
        return load_preset(ref)
    return load_config(ref)


__all__ = [
    "Config", "ConfigError", "DisturbanceConfig", "SCHEMA", "SCHEMA_VERSION", "PRESETS", "parse_config",
    "load_config", "load_preset", "preset_text", "resolve_config",
]
