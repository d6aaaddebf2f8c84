"""Kernel backend selection.

The hot inner loops (batched sampling, simplex pivoting) exist in two
variants: numba-compiled and pure numpy.  The active variant is chosen once
at import time from the ``DPQUANT_BACKEND`` environment variable:

* ``DPQUANT_BACKEND=numba``  -- require numba, fail if it cannot be imported
* ``DPQUANT_BACKEND=numpy``  -- force the pure-numpy path
* unset                      -- numba when importable, numpy otherwise

Both variants consume the same pre-drawn random numbers and perform the same
arithmetic, so results are identical regardless of backend.
"""

from __future__ import annotations

import os

_ENV_VAR = "DPQUANT_BACKEND"
_CHOICES = ("numba", "numpy")


def _detect() -> str:
    requested = os.environ.get(_ENV_VAR, "").strip().lower()
    if requested and requested not in _CHOICES:
        raise ValueError(
            f"{_ENV_VAR} must be one of {_CHOICES}, got {requested!r}"
        )
    if requested == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if requested == "numba":
            raise
        return "numpy"
    return "numba"


BACKEND = _detect()


def active_backend() -> str:
    """Name of the kernel backend selected at import time."""
    return BACKEND


def has_numba() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True
