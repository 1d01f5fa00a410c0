"""Switch between numba-compiled kernels and plain interpreted numpy.

Set ``STEADYSTEIN_DISABLE_NUMBA=1`` before import to run every kernel as
ordinary Python. Results agree with the compiled path up to RNG backend
differences; the interpreted path exists for debugging and for the
benchmark in ``benchmarks/bench_kernels.py``.
"""
from __future__ import annotations

import os

_FLAG = "STEADYSTEIN_DISABLE_NUMBA"


def numba_requested() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() not in {"1", "true", "yes", "on"}


try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a hard dependency but stay importable
    _numba = None

USING_NUMBA = _numba is not None and numba_requested()


def jit(func):
    """Compile ``func`` in nopython mode when numba is active, else return it unchanged."""
    if USING_NUMBA:
        return _numba.njit(cache=True, nogil=True)(func)
    return func


def jit_inline(func):
    """Like ``jit`` but inlined into compiled callers; for small helpers called per step."""
    if USING_NUMBA:
        return _numba.njit(cache=True, nogil=True, inline="always")(func)
    return func


def backend_name() -> str:
    return "numba" if USING_NUMBA else "numpy"
