"""Backend switch for the compiled kernels.

Set ``ETFOPT_NUMBA=0`` in the environment to force the pure-numpy path even
when numba is installed.  The flag is read once, at import time.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba ships with the dev extras
    numba = None

_FLAG = os.environ.get("ETFOPT_NUMBA", "1").strip().lower()

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and _FLAG not in ("0", "false", "no", "off")


def jit(func):
    """Compile ``func`` with ``numba.njit`` when available, else return it unchanged."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
