"""Optional numba acceleration.

Hot kernels are decorated with :func:`njit`.  Setting the environment
variable ``TRAJDIST_DISABLE_NUMBA=1`` before import turns the decorator into
a no-op, so the same source runs as plain numpy code.  Jitted kernels keep the
undecorated function reachable through ``.py_func`` either way, which the
benchmarks use to compare both paths inside one process.
"""

import os

_FLAG = os.environ.get("TRAJDIST_DISABLE_NUMBA", "").strip().lower()
NUMBA_ENABLED = _FLAG not in ("1", "true", "yes", "on")

if NUMBA_ENABLED:
    try:
        import numba as _numba
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False

if NUMBA_ENABLED:

    def njit(func):
        return _numba.njit(cache=True)(func)

else:

    def njit(func):
        func.py_func = func
        return func


def python_impl(kernel):
    """Return the pure-numpy implementation behind a kernel."""
    return getattr(kernel, "py_func", kernel)
