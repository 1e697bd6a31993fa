"""Velocity disturbances injected between controller ticks.

A realized disturbance is a ``(T, nx)`` array that is zero outside the
model's velocity coordinates; row ``t`` is added to the state right after
the plant step taken at tick ``t``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from ..core import ContractError, FloatArray


class DisturbanceKind(enum.Enum):
    IMPULSE = "impulse"
    TIME_VARYING = "time_varying"

    @classmethod
    def parse(cls, v) -> "DisturbanceKind":
        if isinstance(v, cls):
            return v
        try:
            return cls(str(v).lower())
        except ValueError:
            raise ContractError(f"unknown disturbance kind {v!r}; choose from {[k.value for k in cls]}") from None


class Level(enum.Enum):
    SMALL = "small"
    MEDIUM = "medium"
    LARGE = "large"

    @classmethod
    def parse(cls, v) -> "Level":
        if isinstance(v, cls):
            return v
        try:
            return cls(str(v).lower())
        except ValueError:
            raise ContractError(f"unknown level {v!r}; choose from {[k.value for k in cls]}") from None


LEVELS = (Level.SMALL, Level.MEDIUM, Level.LARGE)

# (small, medium, large) velocity magnitudes in model units.
DEFAULT_MAGNITUDES = {
    ("manipulator", DisturbanceKind.IMPULSE): (0.5, 1.5, 3.0),
    ("quadcopter", DisturbanceKind.IMPULSE): (0.2, 0.7, 1.5),
    ("manipulator", DisturbanceKind.TIME_VARYING): (0.1, 0.3, 0.6),
    ("quadcopter", DisturbanceKind.TIME_VARYING): (0.07, 0.2, 0.4),
}

IMPULSE_STEPS = 2
DEFAULT_ONSET_MARGIN = (10, 20)  # onset drawn from [10, T - 20]
DEFAULT_TV_WINDOW = (30, 100)
DEFAULT_SMOOTHING = 0.3


def default_magnitude(system: str, kind: DisturbanceKind, level: Level) -> float:
    try:
        table = DEFAULT_MAGNITUDES[(system, kind)]
    except KeyError:
        raise ContractError(f"no default {kind.value} magnitudes for system {system!r}; set them in the config") from None
    return table[LEVELS.index(level)]


@dataclass(frozen=True)
class DisturbanceSpec:
    """How to draw a disturbance; the realization also needs a seed.

    ``window`` is an inclusive step range.  For impulses it fixes the two
    active steps; when omitted the onset is drawn uniformly from
    ``onset_range`` (default ``[10, T - 20]``).  For time-varying
    disturbances it defaults to steps 30..100.  ``smoothing`` is the pole
    of the first-order filter applied to the direction noise.
    """

    kind: DisturbanceKind
    level: Level
    magnitude: float
    window: tuple[int, int] | None = None
    onset_range: tuple[int, int] | None = None
    smoothing: float = DEFAULT_SMOOTHING

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", DisturbanceKind.parse(self.kind))
        object.__setattr__(self, "level", Level.parse(self.level))
        if not self.magnitude > 0:
            raise ContractError("disturbance magnitude must be positive")
        if not 0 <= self.smoothing < 1:
            raise ContractError("smoothing must lie in [0, 1)")
        if self.window is not None:
            a, b = (int(v) for v in self.window)
            if a < 0 or b < a:
                raise ContractError(f"invalid window {self.window}")
            if self.kind is DisturbanceKind.IMPULSE and b - a + 1 != IMPULSE_STEPS:
                raise ContractError("an impulse window spans exactly 2 steps")
            object.__setattr__(self, "window", (a, b))
        if self.onset_range is not None:
            a, b = (int(v) for v in self.onset_range)
            if a < 0 or b < a:
                raise ContractError(f"invalid onset range {self.onset_range}")
            object.__setattr__(self, "onset_range", (a, b))

    def active_window(self, T: int, rng: np.random.Generator | None = None) -> tuple[int, int]:
        if self.kind is DisturbanceKind.TIME_VARYING:
            a, b = self.window or DEFAULT_TV_WINDOW
        elif self.window is not None:
            a, b = self.window
        else:
            lo, hi = self.onset_range or (DEFAULT_ONSET_MARGIN[0], T - DEFAULT_ONSET_MARGIN[1])
            if hi < lo:
                raise ContractError(f"horizon {T} too short for the impulse onset range")
            if rng is None:
                raise ContractError("a random onset needs a generator")
            a = int(rng.integers(lo, hi + 1))
            b = a + IMPULSE_STEPS - 1
        if b >= T:
            raise ContractError(f"disturbance window ({a}, {b}) exceeds the horizon {T}")
        return a, b

    def realize(self, model, T: int, seed) -> FloatArray:
        return make_disturbance(self, model.nx, T, model.velocity_indices, seed)


def make_disturbance(spec: DisturbanceSpec, nx: int, T: int, velocity_indices, rng_seed) -> FloatArray:
    """Per-step additive perturbation, shape ``(T, nx)``; deterministic in ``rng_seed``."""
    vel = np.asarray(velocity_indices, dtype=int)
    if vel.size == 0:
        raise ContractError("model declares no velocity coordinates to disturb")
    rng = np.random.default_rng(rng_seed)
    out = np.zeros((T, nx))
    if spec.kind is DisturbanceKind.IMPULSE:
        direction = rng.standard_normal(vel.size)
        direction /= np.linalg.norm(direction)
        a, b = spec.active_window(T, rng)
        out[a : b + 1, vel] = spec.magnitude * direction
        return out
    a, b = spec.active_window(T, rng)
    noise = rng.standard_normal((b - a + 1, vel.size))
    s = spec.smoothing
    filtered = lfilter([1.0 - s], [1.0, -s], noise, axis=0)
    norms = np.linalg.norm(filtered, axis=1, keepdims=True)
    out[a : b + 1, vel] = spec.magnitude * filtered / np.where(norms > 0, norms, 1.0)
    return out


__all__ = [
    "DisturbanceKind", "Level", "LEVELS", "DisturbanceSpec", "make_disturbance", "DEFAULT_MAGNITUDES",
    "default_magnitude", "DEFAULT_TV_WINDOW",
]
