"""Optional numba acceleration.

Hot kernels are written once, in numpy-compatible form, and compiled with
``numba.njit`` unless the ``SITELASSO_DISABLE_NUMBA`` environment variable is
set to a truthy value (1/true/yes) or numba is unavailable. The plain-python
originals stay reachable via ``kernel.py_func`` when compiled, which is what
``benchmarks/bench_kernels.py`` uses to time both paths.
"""

import os

_TRUTHY = {"1", "true", "yes", "on"}


def _disabled_by_env() -> bool:
    return os.environ.get("SITELASSO_DISABLE_NUMBA", "").strip().lower() in _TRUTHY


NUMBA_ENABLED = False

if not _disabled_by_env():
    try:
        from numba import njit as _njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False


def maybe_njit(func):
    """Compile ``func`` with numba when enabled, else return it unchanged."""
    if NUMBA_ENABLED:
        return _njit(cache=True)(func)
    return func


def py_version(kernel):
    """Return the uncompiled python version of a kernel."""
    return getattr(kernel, "py_func", kernel)
