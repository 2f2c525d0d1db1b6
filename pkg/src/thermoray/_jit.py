"""Optional numba acceleration.

Set ``THERMORAY_NO_JIT=1`` to run every kernel as plain Python/numpy.
``THERMORAY_THREADS`` caps the numba thread pool.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_disabled = os.environ.get("THERMORAY_NO_JIT", "").strip().lower() in ("1", "true", "yes", "on")
USE_NUMBA = numba is not None and not _disabled

if USE_NUMBA and os.environ.get("THERMORAY_THREADS"):
    try:
        numba.set_num_threads(max(1, int(os.environ["THERMORAY_THREADS"])))
    except (ValueError, RuntimeError):
        pass


def njit(*args, **kwargs):
    """``numba.njit`` when acceleration is on, identity decorator otherwise."""
    if USE_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


def backend():
    return "numba" if USE_NUMBA else "python"
