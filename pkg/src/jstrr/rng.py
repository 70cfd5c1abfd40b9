"""Seeded random streams.

Every stochastic routine in the package takes an integer seed and builds a
``numpy.random.Generator`` backed by PCG64 from it. Child streams are derived
with ``SeedSequence`` spawn keys, so a (seed, key path) pair always maps to
the same stream on every platform and streams for distinct keys are
statistically independent.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """PCG64 generator for ``seed`` and an optional integer key path."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def child_seed(seed: int, *key: int) -> int:
    """Derive a 63-bit integer seed from ``seed`` and a key path.

    Useful where a plain integer has to be handed to another seeded routine
    (for example one seed per fold or per document).
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    hi, lo = (int(x) for x in ss.generate_state(2, dtype=np.uint32))
    return ((hi & 0x7FFFFFFF) << 32) | lo
