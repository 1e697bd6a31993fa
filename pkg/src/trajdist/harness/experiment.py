"""N-replication closed-loop benchmark with per-seed cost normalization."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..core import ContractError
from ..tracking import ControllerKind, Plan, run_closed_loop
from .disturbance import DisturbanceSpec

log = logging.getLogger(__name__)

CONTROLLERS = tuple(ControllerKind)
NO_DISTURBANCE = "none"


@dataclass(frozen=True)
class ExperimentSpec:
    """One benchmark cell: a plan, a disturbance family and ``n_seeds`` replications.

    ``disturbance=None`` runs every controller undisturbed.  Replication ``i``
    draws its disturbance from the ``i``-th child of
    ``SeedSequence(master_seed)``, so every controller in a replication sees
    the same realization and cells sharing a master seed share directions.
    """

    plan: Plan
    disturbance: DisturbanceSpec | None
    n_seeds: int
    master_seed: int = 0
    controllers: tuple[ControllerKind, ...] = CONTROLLERS
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.n_seeds < 1:
            raise ContractError("n_seeds must be at least 1")
        if self.jobs < 1:
            raise ContractError("jobs must be at least 1")
        if self.master_seed < 0:
            raise ContractError("master_seed must be non-negative")
        kinds = tuple(ControllerKind.parse(k) for k in self.controllers)
        if not kinds or len(set(kinds)) != len(kinds):
            raise ContractError("controllers must be a non-empty list without repeats")
        object.__setattr__(self, "controllers", kinds)

    @property
    def system(self) -> str:
        return self.plan.model.name

    @property
    def kind_label(self) -> str:
        return NO_DISTURBANCE if self.disturbance is None else self.disturbance.kind.value

    @property
    def level_label(self) -> str:
        return NO_DISTURBANCE if self.disturbance is None else self.disturbance.level.value


@dataclass(frozen=True)
class RunRecord:
    system: str
    controller: ControllerKind
    disturbance_kind: str
    level: str
    seed: int
    raw_cost: float  # inf when diverged
    normalized_cost: float  # inf when diverged
    diverged: bool


@dataclass(frozen=True)
class Summary:
    mean: float  # nan when no run of this controller was included
    std: float
    n_excluded: int  # runs left out of mean/std: own divergences plus dropped seeds
    n_diverged: int


@dataclass(frozen=True)
class ExperimentResult:
    system: str
    disturbance_kind: str
    level: str
    controllers: tuple[ControllerKind, ...]
    records: tuple[RunRecord, ...]  # included seeds only, sorted by (seed, controller)
    dropped_seeds: tuple[int, ...]  # seeds on which every controller diverged
    n_seeds: int
    summary: dict[ControllerKind, Summary] = field(default_factory=dict)

    def normalized(self, controller: ControllerKind | str) -> np.ndarray:
        kind = ControllerKind.parse(controller)
        return np.array([r.normalized_cost for r in self.records if r.controller is kind])


def seed_sequences(master_seed: int, n: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(master_seed).spawn(n)


def _run_seed(plan: Plan, spec_dist, controllers, seed_seq) -> list[tuple[float, bool]]:
    d = None if spec_dist is None else spec_dist.realize(plan.model, plan.T, seed_seq)
    out = []
    for kind in controllers:
        res = run_closed_loop(plan, kind, disturbance=d)
        out.append((res.cost, res.diverged))
    return out


_WORKER_PLAN: Plan | None = None


def _init_worker(plan: Plan) -> None:
    global _WORKER_PLAN
    _WORKER_PLAN = plan


def _worker(args):
    spec_dist, controllers, seed_seq = args
    return _run_seed(_WORKER_PLAN, spec_dist, controllers, seed_seq)


def normalize(raw: np.ndarray, diverged: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Divide each row by its minimum over non-diverged entries.

    Returns the normalized array (``inf`` where diverged) and a boolean mask
    of rows kept (rows where everything diverged are dropped).
    """
    raw = np.asarray(raw, dtype=float)
    diverged = np.asarray(diverged, dtype=bool)
    keep = ~np.all(diverged, axis=1)
    masked = np.where(diverged, np.inf, raw)
    mins = np.min(masked, axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        norm = np.where(diverged, np.inf, raw / np.where(keep[:, None], mins, 1.0))
    return norm, keep


def summarize(norm: np.ndarray, diverged: np.ndarray, keep: np.ndarray, controllers) -> dict:
    out = {}
    n_dropped = int(np.sum(~keep))
    for j, kind in enumerate(controllers):
        ok = keep & ~diverged[:, j]
        vals = norm[ok, j]
        mean = float(vals.mean()) if vals.size else float("nan")
        std = float(vals.std()) if vals.size else float("nan")
        n_div = int(np.sum(diverged[keep, j]))
        out[kind] = Summary(mean, std, n_div + n_dropped, n_div)
    return out


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    """Run every controller on every replication and normalize per replication."""
    seqs = seed_sequences(spec.master_seed, spec.n_seeds)
    ctrls = spec.controllers
    if spec.jobs == 1:
        rows = [_run_seed(spec.plan, spec.disturbance, ctrls, s) for s in seqs]
    else:
        with ProcessPoolExecutor(max_workers=spec.jobs, initializer=_init_worker, initargs=(spec.plan,)) as pool:
            rows = list(pool.map(_worker, [(spec.disturbance, ctrls, s) for s in seqs]))
    raw = np.array([[c for c, _ in row] for row in rows])
    div = np.array([[d for _, d in row] for row in rows], dtype=bool)
    norm, keep = normalize(raw, div)
    records = []
    for i in range(spec.n_seeds):
        if not keep[i]:
            continue
        for j, kind in enumerate(ctrls):
            records.append(RunRecord(spec.system, kind, spec.kind_label, spec.level_label, i,
                                     float(raw[i, j]), float(norm[i, j]), bool(div[i, j])))
    dropped = tuple(int(i) for i in np.flatnonzero(~keep))
    if dropped:
        log.warning("%d seed(s) dropped: every controller diverged", len(dropped))
    return ExperimentResult(
        spec.system, spec.kind_label, spec.level_label, ctrls, tuple(records), dropped, spec.n_seeds,
        summarize(norm, div, keep, ctrls),
    )


def run_sweep(plan: Plan, disturbances: Sequence[DisturbanceSpec | None], n_seeds: int, master_seed: int = 0,
              controllers=CONTROLLERS, jobs: int = 1) -> list[ExperimentResult]:
    """One experiment per disturbance spec, all sharing the plan and master seed."""
    results = []
    for dist in disturbances:
        spec = ExperimentSpec(plan, dist, n_seeds, master_seed, tuple(controllers), jobs)
        log.info("experiment %s/%s/%s: %d seeds", spec.system, spec.kind_label, spec.level_label, n_seeds)
        results.append(run_experiment(spec))
    return results


__all__ = [
    "ExperimentSpec", "ExperimentResult", "RunRecord", "Summary", "run_experiment", "run_sweep",
    "normalize", "summarize", "seed_sequences", "CONTROLLERS", "NO_DISTURBANCE",
]
