"""Counter-based random streams.

Every draw is addressed by ``(seed, path, purpose)``: the Philox key is
``(seed, path)`` and the purpose tag occupies the top word of the counter,
so streams never overlap and a path's randomness does not depend on how
paths are scheduled across workers.
"""

from __future__ import annotations

import numpy as np

BROWNIAN = 1
# uniform probe offsets for Monte Carlo duality checks
PROBES = 2
# Strip layer k of the dominating Poisson measure uses tag CANDIDATES + k.
CANDIDATES = 16

_MASK64 = (1 << 64) - 1


def stream(seed: int, path: int, purpose: int) -> np.random.Generator:
    """Return the generator for one (seed, path, purpose) triple."""
    if path < 0 or purpose < 0:
        raise ValueError("path and purpose must be non-negative")
    bitgen = np.random.Philox(
        key=np.array([seed & _MASK64, path & _MASK64], dtype=np.uint64),
        counter=np.array([0, 0, 0, purpose], dtype=np.uint64),
    )
    return np.random.Generator(bitgen)
