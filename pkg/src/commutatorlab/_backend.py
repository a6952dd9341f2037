"""Backend selection for the hot numeric kernels.

Set ``COMMUTATORLAB_BACKEND=numpy`` to force the pure-numpy path. The default
(``auto``) uses numba when it imports cleanly. ``COMMUTATORLAB_THREADS`` caps
the numba thread pool and the worker count of the CLI.
"""

import os

_requested = os.environ.get("COMMUTATORLAB_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"COMMUTATORLAB_BACKEND must be auto, numba or numpy, got {_requested!r}"
    )

try:
    import numba

    NUMBA_AVAILABLE = True
except ImportError:
    numba = None
    NUMBA_AVAILABLE = False

if _requested == "numba" and not NUMBA_AVAILABLE:
    raise ImportError("COMMUTATORLAB_BACKEND=numba but numba is not importable")

# Compiled twins exist whenever numba imports; this flag only picks the default.
USE_NUMBA = NUMBA_AVAILABLE and _requested != "numpy"


def thread_cap():
    """Worker cap from ``COMMUTATORLAB_THREADS`` (None when unset)."""
    raw = os.environ.get("COMMUTATORLAB_THREADS")
    if not raw:
        return None
    n = int(raw)
    if n < 1:
        raise ValueError("COMMUTATORLAB_THREADS must be a positive integer")
    return n


if NUMBA_AVAILABLE:
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # the bundled TBB is too old on many hosts; workqueue always loads
        numba.config.THREADING_LAYER = "workqueue"
    _cap = thread_cap()
    if _cap is not None:
        numba.set_num_threads(min(_cap, numba.config.NUMBA_NUM_THREADS))


def njit(*args, **kwargs):
    """``numba.njit`` with caching; identity decorator without numba."""
    if not NUMBA_AVAILABLE:
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)


prange = numba.prange if NUMBA_AVAILABLE else range


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
