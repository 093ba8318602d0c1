"""Counter-based random streams.

All randomized components derive their generators from a global seed plus a
stream index via the Philox counter-based bit generator, so independent
trials are reproducible regardless of execution order.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _fold(indices) -> int:
    h = 0
    for ix in indices:
        h = ((h ^ (int(ix) & _MASK64)) * _GOLDEN) & _MASK64
        h ^= h >> 29
    return h


def derive_rng(seed: int, *stream: int) -> np.random.Generator:
    """Generator for stream `stream` of global seed `seed` (Philox key = (seed, fold))."""
    key = np.array([int(seed) & _MASK64, _fold(stream)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
