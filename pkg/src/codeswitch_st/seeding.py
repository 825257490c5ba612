"""Counter-based expansion of one root seed into independent named streams.

Every random draw in the package goes through ``rng_for(root, *path)``. The
path (strings and/or ints) is mapped to a numpy ``SeedSequence`` spawn key:
strings via CRC-32 of their UTF-8 bytes, ints as-is. Two different paths give
statistically independent generators, and adding a new consumer (a new path)
never shifts the draws seen by existing ones.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_part(part) -> int:
    if isinstance(part, (bool, np.bool_)):
        raise TypeError("bool is not a valid stream key")
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("stream keys must be non-negative")
        return int(part)
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    raise TypeError(f"unsupported stream key {part!r}")


def seed_sequence(root: int, *path) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(root), spawn_key=tuple(_key_part(p) for p in path))


def rng_for(root: int, *path) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed_sequence(root, *path)))


def derive_seed(root: int, *path) -> int:
    """A plain 32-bit integer seed for components that want an int (e.g. ClassifierSpec.seed)."""
    return int(seed_sequence(root, *path).generate_state(1, dtype=np.uint32)[0])
