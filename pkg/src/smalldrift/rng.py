"""Counter-based random streams.

Every random draw in the package comes from a Philox generator keyed by
(seed, purpose, index): the 128-bit Philox key holds the user seed in
one word and ``purpose << 48 | index`` in the other.  Distinct purposes
(path noise, grid jitter, the Brownian-supremum oracle) and distinct
replication indices therefore never share a stream, replications can be
generated in any order or in parallel, and the draw for a given
(seed, purpose, index, position) is the same on every platform.

Standard normals use inverse-CDF sampling (scipy's ndtri) on uniforms
built from 53-bit integers, avoiding rejection-sampling stream
divergence across library versions.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

PURPOSE_PATH = 0
PURPOSE_JITTER = 1
PURPOSE_BM_ORACLE = 2

_MAX_INDEX = 1 << 48


def stream(seed: int, purpose: int, index: int = 0) -> np.random.Generator:
    """Generator for the (seed, purpose, index) stream."""
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if not 0 <= index < _MAX_INDEX:
        raise ValueError(f"stream index must be in [0, 2^48), got {index}")
    key = np.array([seed, (purpose << 48) | index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def standard_normals(seed: int, purpose: int, index: int, n: int) -> np.ndarray:
    """n standard normal draws from the (seed, purpose, index) stream."""
    g = stream(seed, purpose, index)
    u = (g.integers(0, 1 << 53, size=n, dtype=np.int64) + 0.5) * 2.0**-53
    return ndtri(u)
