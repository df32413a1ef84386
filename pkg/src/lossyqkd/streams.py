"""Counter-based random streams.

Every source of randomness in the package is a numpy Generator backed by the
Philox counter-based bit generator, keyed by a 64-bit seed plus a stream
index. Streams with distinct (seed, index) pairs are statistically
independent and fully reproducible, so callers can hand out substreams for
separate sampling stages without coordinating state.
"""

from __future__ import annotations

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF


def stream(seed: int, index: int = 0) -> np.random.Generator:
    """Generator for the (seed, index) stream."""
    key = np.array([int(seed) & _MASK64, int(index) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
