"""Named, counter-based random streams.

Every random draw in the simulator comes from a Philox generator keyed by
``(master seed, stream path)``. A stream path is a tuple of strings/ints such
as ``("dpffl", "payment", 3)``; the same path always yields the same draws, no
matter which thread or in which order streams are consumed.
"""
from __future__ import annotations

import hashlib

import numpy as np


def _path_words(path) -> list[int]:
    words = []
    for part in path:
        digest = hashlib.sha256(repr(part).encode()).digest()
        words.append(int.from_bytes(digest[:4], "little"))
    return words


def stream(seed: int, *path) -> np.random.Generator:
    """Return an independent generator for ``path`` under master ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_path_words(path)))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *path) -> int:
    """Integer child seed, for handing to code that wants a plain int."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_path_words(path)))
    return int(ss.generate_state(1, dtype=np.uint32)[0])
