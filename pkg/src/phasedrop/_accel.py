"""Optional numba acceleration.

Set ``PHASEDROP_NO_NUMBA=1`` in the environment (before import) to force the
pure-numpy code paths everywhere. The flag is read once at import time;
``use_numba()`` reports the active choice.
"""
from __future__ import annotations

import os

try:
    from numba import njit as _njit
    NUMBA_INSTALLED = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_INSTALLED = False

_DISABLED = os.environ.get("PHASEDROP_NO_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}


def use_numba() -> bool:
    return NUMBA_INSTALLED and not _DISABLED


def optional_njit(*args, **kwargs):
    """``numba.njit`` when available and enabled, identity otherwise."""
    def decorator(func):
        if use_numba():
            return _njit(*args, **kwargs)(func)
        return func
    return decorator
