"""Seed handling.

Every operation that consumes randomness takes an explicit seed; there is no
module-level generator.  Derived streams follow one documented rule:

    substream(master, *path) == Generator(PCG64(SeedSequence(master, spawn_key=path)))

where string path components are mapped to integers through crc32.  Replica k
of stage "geometry" therefore always draws from
``substream(master, "geometry", eps_index, k)`` regardless of scheduling
order, which is what makes parallel sweeps reproducible.
"""

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _key(part):
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    part = int(part)
    if part < 0:
        raise ValueError(f"seed path components must be non-negative, got {part}")
    return part


def substream(master_seed, *path):
    """Deterministic child generator for (master seed, path)."""
    ss = np.random.SeedSequence(int(master_seed) & _MASK64,
                                spawn_key=tuple(_key(p) for p in path))
    return np.random.Generator(np.random.PCG64(ss))


def substream_seed(master_seed, *path):
    """A 64-bit integer seed derived by the same rule, for record keeping."""
    ss = np.random.SeedSequence(int(master_seed) & _MASK64,
                                spawn_key=tuple(_key(p) for p in path))
    return int(ss.generate_state(1, np.uint64)[0])
