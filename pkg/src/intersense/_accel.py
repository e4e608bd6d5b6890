"""Backend switch for the hot kernels.

Kernels are written once as plain Python over numpy arrays and compiled with
``numba.njit`` unless ``INTERSENSE_DISABLE_NUMBA`` is set to a truthy value or
numba cannot be imported. Vectorised kernels additionally ship a pure-numpy
implementation that is used when numba is off.
"""

import os

_FLAG = os.environ.get("INTERSENSE_DISABLE_NUMBA", "").strip().lower()
DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    if DISABLED:
        raise ImportError
    import numba

    HAS_NUMBA = True
except ImportError:
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not DISABLED


def njit(func):
    """Compile ``func`` in nopython mode, or return it unchanged when disabled."""
    if numba is None:
        return func
    return numba.njit(cache=True, nogil=True)(func)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
