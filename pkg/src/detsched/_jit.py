"""Numba dispatch.

Hot kernels are compiled with numba unless ``DETSCHED_NUMBA=0`` is set in
the environment (or numba cannot be imported), in which case the pure
numpy implementations in :mod:`detsched.kernels` are used instead.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and os.environ.get("DETSCHED_NUMBA", "1").strip().lower() not in (
    "0",
    "false",
    "no",
    "off",
)


def njit(func):
    """Compile ``func`` in nopython mode when numba is importable.

    Always compiles when available, independent of the env flag, so that the
    benchmark can time both paths in one process.
    """
    if numba is None:
        return func
    return numba.njit(cache=True)(func)


def backend():
    return "numba" if USE_NUMBA else "numpy"
