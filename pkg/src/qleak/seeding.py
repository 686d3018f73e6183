"""Counter-based seed derivation.

Every random stream is addressed by ``(master_seed, stream, index)`` so that
results do not depend on the order in which tasks are executed.
"""

from __future__ import annotations

import zlib

import numpy as np


def _stream_key(stream) -> int:
    if isinstance(stream, (int, np.integer)):
        return int(stream)
    return zlib.crc32(str(stream).encode("utf-8"))


def child_seed(master_seed: int, stream, index: int = 0) -> np.random.SeedSequence:
    """Seed sequence for the ``index``-th draw of a named stream."""
    return np.random.SeedSequence(int(master_seed), spawn_key=(_stream_key(stream), int(index)))


def derive_rng(master_seed: int, stream, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(child_seed(master_seed, stream, index))
