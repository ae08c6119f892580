"""Kernel backend selection.

The hot numeric kernels have two implementations: numba-compiled loops
and pure-numpy array code.  The numba path is the default whenever numba
imports; setting the environment variable ``SMALLDRIFT_NO_NUMBA`` to
anything but ``0`` or empty forces the numpy path.  Both backends honor
the same contracts and are individually deterministic; they may differ
from each other by a few ulp in transcendental functions.
"""

from __future__ import annotations

import os

ENV_FLAG = "SMALLDRIFT_NO_NUMBA"


def _probe() -> bool:
    if os.environ.get(ENV_FLAG, "").strip() not in ("", "0"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


HAS_NUMBA = _probe()


def numba_enabled() -> bool:
    """True when the compiled backend is active for this process."""
    return HAS_NUMBA
