"""Optional numba acceleration.

``WEAKFLOW_NUMBA=0`` forces the pure-numpy code paths, ``WEAKFLOW_THREADS``
sets the width of the numba thread pool and of the scipy FFT workers.
"""
import os

_FALSE = {"0", "false", "no", "off"}

try:
    import numba

    if "NUMBA_THREADING_LAYER" not in os.environ:
        # skip the TBB probe, which warns on older TBB installs
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False


def numba_enabled() -> bool:
    """True when the compiled kernels should be used (checked per call)."""
    if not HAS_NUMBA:
        return False
    return os.environ.get("WEAKFLOW_NUMBA", "1").strip().lower() not in _FALSE


def thread_count() -> int:
    raw = os.environ.get("WEAKFLOW_THREADS", "").strip()
    if not raw:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"WEAKFLOW_THREADS must be a positive integer, got {raw!r}")
    if n < 1:
        raise ValueError(f"WEAKFLOW_THREADS must be a positive integer, got {raw!r}")
    return n


def apply_thread_setting() -> int:
    n = thread_count()
    if HAS_NUMBA:
        n = min(n, numba.config.NUMBA_NUM_THREADS)
        numba.set_num_threads(n)
    return n


if HAS_NUMBA:
    njit = numba.njit
    prange = numba.prange
else:  # pragma: no cover

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap

    prange = range
