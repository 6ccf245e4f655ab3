"""Backend selection for the compiled kernels.

Set ``OUTBREAKBENCH_DISABLE_NUMBA=1`` to force the pure-numpy path. When numba
cannot be imported the numpy path is used regardless.
"""

from __future__ import annotations

import contextlib
import os

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        def wrap(func):
            def unavailable(*a, **k):
                raise RuntimeError("numba is not installed")

            return unavailable

        if args and callable(args[0]):
            return wrap(args[0])
        return wrap


ENV_FLAG = "OUTBREAKBENCH_DISABLE_NUMBA"


def _env_disabled() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() in ("1", "true", "yes", "on")


_use_numba = NUMBA_AVAILABLE and not _env_disabled()


def numba_enabled() -> bool:
    return _use_numba


def backend_name() -> str:
    return "numba" if _use_numba else "numpy"


def set_numba(enabled: bool) -> None:
    global _use_numba
    if enabled and not NUMBA_AVAILABLE:
        raise RuntimeError("numba is not installed")
    _use_numba = bool(enabled)


@contextlib.contextmanager
def backend(enabled: bool):
    """Temporarily switch the kernel backend (used by tests and benchmarks)."""
    previous = _use_numba
    set_numba(enabled)
    try:
        yield
    finally:
        set_numba(previous)
