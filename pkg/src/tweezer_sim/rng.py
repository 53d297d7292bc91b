"""Deterministic random-number substreams.

Every stochastic routine in the package draws from a counter-based Philox
generator keyed by an explicit integer tuple (seed, purpose, index, ...).
Random numbers are always consumed in a canonical order that does not
depend on how work is partitioned across threads, so any seeded run is
bit-reproducible for any worker count.
"""

from __future__ import annotations

import numpy as np

__all__ = ["substream"]

# fixed purpose tags for the package's internal streams
SAMPLER = 1
RELEASE = 2
FRINGE = 3
MODEL = 4
EXPERIMENT = 5


def substream(*key: int) -> np.random.Generator:
    """Return the generator for the given integer key tuple.

    The same key always yields the same stream; distinct keys yield
    independent streams.
    """
    if not key:
        raise ValueError("substream key must not be empty")
    ints = [int(k) for k in key]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(ints)))
