"""Command line entry point: ``trajdist {plan,sample,track,bench,check}``.

Exit codes: 0 on success, 2 on usage or configuration errors, 1 on any other
failure.  Failures print one JSON error record to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from ..core import TrajDistError
from ..ilqr import sample_trajectories
from ..tracking import ControllerKind, run_closed_loop
from .config import PRESETS, Config, ConfigError, resolve_config
from .disturbance import DisturbanceKind, Level
from .dump import dump_text, write_dump
from .experiment import run_sweep
from .export import export_results, format_table
from .selfcheck import run_checks

log = logging.getLogger("trajdist")


class UsageError(TrajDistError, ValueError):
    """Invalid combination of command line options."""


def _add_common(p: argparse.ArgumentParser, seed_help: str) -> None:
    p.add_argument("--config", required=True, help=f"YAML config path or preset name ({', '.join(PRESETS)})")
    p.add_argument("--out", type=Path, default=None, help="output directory (default: output.dir from the config)")
    p.add_argument("--seed", type=int, default=None, help=seed_help)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trajdist", description=__doc__.splitlines()[0])
    parser.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="logging verbosity on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="solve the long-horizon problem and dump plan, std and convergence trace")
    _add_common(p, "unused; accepted for uniformity")

    p = sub.add_parser("sample", help="draw trajectories from the plan distribution")
    _add_common(p, "sampling seed (default: experiment.master_seed)")
    p.add_argument("--count", type=int, default=20, help="number of samples (default 20)")

    p = sub.add_parser("track", help="one closed-loop run with a chosen controller and disturbance")
    _add_common(p, "disturbance seed (default: experiment.master_seed)")
    p.add_argument("--controller", default="mpc_cond", choices=[k.value for k in ControllerKind])
    p.add_argument("--kind", default="impulse", choices=[k.value for k in DisturbanceKind] + ["none"],
                   help="disturbance kind, or none")
    p.add_argument("--level", default="medium", choices=[v.value for v in Level])

    p = sub.add_parser("bench", help="benchmark sweep: controllers x levels x kinds over N seeds")
    _add_common(p, "master seed (default: experiment.master_seed)")
    p.add_argument("--controller", action="append", choices=[k.value for k in ControllerKind],
                   help="restrict to a controller (repeatable; default all)")
    p.add_argument("--level", action="append", choices=[v.value for v in Level],
                   help="restrict to a level (repeatable; default disturbance.levels)")
    p.add_argument("--kind", action="append", choices=[k.value for k in DisturbanceKind],
                   help="restrict to a disturbance kind (repeatable; default disturbance.kinds)")
    p.add_argument("--seeds", type=int, default=None, help="number of replications N (default experiment.seeds)")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default experiment.jobs)")

    sub.add_parser("check", help="run the numerical self-tests")
    return parser


def _out_dir(cfg: Config, args) -> Path:
    return args.out if args.out is not None else cfg.output_dir


def _emit(record: dict) -> None:
    print(json.dumps(record, sort_keys=True))


def cmd_plan(cfg: Config, args) -> int:
    t0 = time.perf_counter()
    plan = cfg.build_plan()
    sol, dist = plan.solution, plan.distribution
    out = _out_dir(cfg, args)
    traj = sol.trajectory
    extra = {"converged": sol.converged, "iterations": sol.iterations, "final_cost": repr(sol.final_cost)}
    plan_path = write_dump(out / "plan.txt",
                           dump_text(cfg.system, cfg.model.dt, traj.states, traj.controls, dist.state_std(), extra))
    lines = ["iteration,cost,alpha,reg"] + [f"{r.iteration},{r.cost!r},{r.alpha!r},{r.reg!r}" for r in sol.trace]
    trace_path = write_dump(out / "trace.csv", "\n".join(lines) + "\n")
    _emit({"command": "plan", "system": cfg.system, "converged": sol.converged, "iterations": sol.iterations,
           "final_cost": sol.final_cost, "final_du_inf": sol.final_du_inf, "stop_reason": sol.stop_reason,
           "plan": str(plan_path), "trace": str(trace_path), "seconds": round(time.perf_counter() - t0, 3)})
    return 0


def cmd_sample(cfg: Config, args) -> int:
    if args.count < 1:
        raise UsageError("--count must be at least 1")
    plan = cfg.build_plan()
    d = plan.distribution
    seed = cfg.master_seed if args.seed is None else args.seed
    xs, us = sample_trajectories(d, args.count, seed)
    out = _out_dir(cfg, args)
    path = write_dump(out / "samples.txt", dump_text(cfg.system, cfg.model.dt, xs, us, extra={"count": args.count,
                                                                                             "seed": seed}))
    mean_path = write_dump(out / "plan.txt", dump_text(cfg.system, cfg.model.dt, plan.x_star, plan.u_star,
                                                       d.state_std()))
    _emit({"command": "sample", "system": cfg.system, "count": args.count, "seed": seed, "samples": str(path),
           "plan": str(mean_path)})
    return 0


def cmd_track(cfg: Config, args) -> int:
    plan = cfg.build_plan()
    seed = cfg.master_seed if args.seed is None else args.seed
    if args.kind == "none":
        dist = None
    else:
        dist = cfg.disturbance.spec(DisturbanceKind.parse(args.kind), Level.parse(args.level))
    res = run_closed_loop(plan, args.controller, disturbance=dist, seed=seed)
    out = _out_dir(cfg, args)
    extra = {"controller": args.controller, "disturbance": args.kind, "level": args.level, "seed": seed,
             "diverged": res.diverged, "cost": repr(res.cost)}
    path = write_dump(out / f"track_{args.controller}.txt",
                      dump_text(cfg.system, cfg.model.dt, res.states, res.controls, extra=extra))
    _emit({"command": "track", "system": cfg.system, "controller": args.controller, "disturbance": args.kind,
           "level": args.level, "seed": seed, "cost": res.cost if np.isfinite(res.cost) else None,
           "plan_cost": plan.cost_value, "diverged": res.diverged, "reason": res.reason, "trajectory": str(path)})
    return 0


def cmd_bench(cfg: Config, args) -> int:
    overrides = {}
    if args.seeds is not None:
        overrides["seeds"] = args.seeds
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    if overrides:
        cfg = cfg.with_overrides(experiment=overrides)
    kinds = [DisturbanceKind.parse(k) for k in args.kind] if args.kind else list(cfg.disturbance.kinds)
    levels = [Level.parse(v) for v in args.level] if args.level else list(cfg.disturbance.levels)
    controllers = tuple(ControllerKind.parse(c) for c in args.controller) if args.controller else tuple(ControllerKind)
    if not kinds or not levels:
        raise UsageError("nothing to run: no disturbance kinds or levels selected")
    specs = [cfg.disturbance.spec(k, lv) for k in kinds for lv in levels]
    t0 = time.perf_counter()
    plan = cfg.build_plan()
    results = run_sweep(plan, specs, cfg.seeds, cfg.master_seed, controllers, cfg.jobs)
    out = _out_dir(cfg, args)
    csv_path = export_results(results, out / "results.csv", "csv")
    json_path = export_results(results, out / "results.json", "json")
    table = format_table(results)
    write_dump(out / "table.txt", table)
    print(table)
    _emit({"command": "bench", "system": cfg.system, "seeds": cfg.seeds, "master_seed": cfg.master_seed,
           "csv": str(csv_path), "json": str(json_path), "seconds": round(time.perf_counter() - t0, 1)})
    return 0


def cmd_check(args) -> int:
    results = run_checks()
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<30} error={r.error:.3e}  tol={r.tolerance:.0e}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(json.dumps({"error": "SelfCheckFailed", "message": f"failed: {', '.join(failed)}"}), file=sys.stderr)
        return 1
    return 0


COMMANDS = {"plan": cmd_plan, "sample": cmd_sample, "track": cmd_track, "bench": cmd_bench}


def _error(exc: BaseException, command: str | None, code: int) -> int:
    record = {"error": type(exc).__name__, "message": str(exc), "command": command, "exit_code": code}
    print(json.dumps(record), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors itself
        return int(exc.code or 0)
    logging.basicConfig(level=args.log_level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "check":
            return cmd_check(args)
        cfg = resolve_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, UsageError) as exc:
        return _error(exc, args.command, 2)
    except (TrajDistError, OSError, ValueError, ArithmeticError) as exc:
        return _error(exc, args.command, 1)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
