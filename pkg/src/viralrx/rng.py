"""Seeded random streams.

All randomness flows through :func:`stream`, which derives an independent
PCG64 generator from ``(seed, name)``.  Each pipeline stage uses its own
named stream so that, e.g., changing the split seed cannot perturb balancing.
"""

import zlib

import numpy as np


def _key(name):
    return zlib.crc32(name.encode("utf-8"))


def stream(seed, name):
    """Return a generator for the sub-stream ``name`` of ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(_key(name),))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed, name):
    """Derive a child integer seed (used for per-run seeds)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(_key(name),))
    return int(ss.generate_state(1, dtype=np.uint32)[0])
