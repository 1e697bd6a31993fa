"""Time the jitted kernels against their pure-numpy source on the quadcopter task.

Usage: ``python3 benchmarks/bench_numba.py [--repeat N] [--system NAME]``.

Two comparisons are printed:

* per kernel, the jitted dispatcher against its ``.py_func`` in one process
  (helpers called from inside a ``.py_func`` stay jitted, so this isolates
  the outer loop);
* end to end, a full long-horizon plan solve in a subprocess with numba on
  and with ``TRAJDIST_DISABLE_NUMBA=1``, where every kernel is plain numpy.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from trajdist import _cost_kernels as CK
from trajdist import _riccati
from trajdist._jit import NUMBA_ENABLED, python_impl
from trajdist.harness.config import load_preset
from trajdist.systems import _kernels as K


def _time(fn, args, repeat: int) -> tuple[float, object]:
    out = fn(*args)
    t0 = time.perf_counter()
    for _ in range(repeat):
        out = fn(*args)
    return (time.perf_counter() - t0) / repeat, out


_SOLVE = """
import json, sys, time
from trajdist.harness.config import load_preset
cfg = load_preset(sys.argv[1])
cfg.build_plan()  # compile or load the cache outside the timed region
t0 = time.perf_counter()
plan = cfg.build_plan()
print(json.dumps({"seconds": time.perf_counter() - t0, "cost": plan.solution.final_cost,
                  "iterations": plan.solution.iterations}))
"""


def end_to_end(system: str) -> None:
    rows = {}
    for label, flag in (("numba", "0"), ("numpy", "1")):
        env = dict(os.environ, TRAJDIST_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", _SOLVE, system], env=env, capture_output=True, text=True,
                             check=True)
        rows[label] = json.loads(out.stdout.strip().splitlines()[-1])
    fast, slow = rows["numba"], rows["numpy"]
    same = abs(fast["cost"] - slow["cost"]) <= 1e-9 * abs(fast["cost"]) and fast["iterations"] == slow["iterations"]
    print(f"\nplan solve ({system}): numba {fast['seconds']:.2f} s, numpy {slow['seconds']:.2f} s, "
          f"speedup {slow['seconds'] / fast['seconds']:.1f}x, identical result: {same}")


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--system", default="bicopter", help="preset for the end-to-end solve")
    args = ap.parse_args(argv)
    if not NUMBA_ENABLED:
        print("numba disabled (TRAJDIST_DISABLE_NUMBA); both columns run the same numpy code")

    cfg = load_preset("quadcopter")
    m, T = cfg.model, cfg.T
    rng = np.random.default_rng(0)
    us = np.repeat(cfg.cost.u_ref[None], T, axis=0) + 0.01 * rng.standard_normal((T, m.nu))
    xs = K.rollout(m.kind, m.pvec, cfg.x0, us)
    cost_args = cfg.cost.arrays(T, m).kernel_args()
    A, B = K.linearize_trajectory(m.kind, m.pvec, xs, us)
    cx, cu, cxx, cuu = CK.quadratize(m.kind, m.pvec, xs, us, *cost_args)

    cases = [
        ("rollout", K.rollout, (m.kind, m.pvec, cfg.x0, us)),
        ("linearize_trajectory", K.linearize_trajectory, (m.kind, m.pvec, xs, us)),
        ("quadratize", CK.quadratize, (m.kind, m.pvec, xs, us, *cost_args)),
        ("total_cost", CK.total_cost, (m.kind, m.pvec, xs, us, *cost_args)),
        ("backward_pass", _riccati.backward_pass, (A, B, cx, cu, cxx, cuu, 1e-6)),
    ]
    print(f"{'kernel':<22}{'numba [ms]':>12}{'py_func [ms]':>13}{'speedup':>10}  agree")
    for name, kernel, kargs in cases:
        t_fast, out_fast = _time(kernel, kargs, args.repeat)
        t_slow, out_slow = _time(python_impl(kernel), kargs, max(1, args.repeat // 5))
        fa = out_fast if isinstance(out_fast, tuple) else (out_fast,)
        sa = out_slow if isinstance(out_slow, tuple) else (out_slow,)
        agree = all(np.allclose(a, b, rtol=1e-10, atol=1e-12) for a, b in zip(fa, sa))
        print(f"{name:<22}{1e3 * t_fast:>12.3f}{1e3 * t_slow:>13.3f}{t_slow / t_fast:>10.1f}  {agree}")
    end_to_end(args.system)


if __name__ == "__main__":
    main()
