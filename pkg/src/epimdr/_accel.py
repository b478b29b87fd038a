"""numba switch.

Set ``EPIMDR_DISABLE_NUMBA=1`` to force the pure-numpy kernels. When numba
cannot be imported the numpy path is used as well.
"""

from __future__ import annotations

import os

_FLAG = "EPIMDR_DISABLE_NUMBA"


def _env_disabled() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn


USE_NUMBA = HAVE_NUMBA and not _env_disabled()


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
