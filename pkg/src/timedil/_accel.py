"""Backend selection for the hot kernels.

Numba is used when importable unless ``TIMEDIL_DISABLE_NUMBA`` is set to a
truthy value, in which case every kernel falls back to its pure-numpy twin.
Both paths accumulate in the same order and produce bit-identical results.
"""
import os

_FLAG = os.environ.get("TIMEDIL_DISABLE_NUMBA", "").strip().lower()
NUMBA_DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not NUMBA_DISABLED


def njit(fn):
    """``numba.njit(cache=True)`` when numba is installed, identity otherwise.

    fastmath stays off: reassociation or fma contraction would break the
    fixed summation order the equivalence checks depend on.
    """
    if not HAVE_NUMBA:  # pragma: no cover
        return fn
    return _njit(cache=True)(fn)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
