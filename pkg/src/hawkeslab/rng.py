"""Counter-based random streams keyed by (seed, replicate, tag).

Every stream is a :class:`numpy.random.Generator` driven by Philox, whose
key is derived from a :class:`numpy.random.SeedSequence` over the integer
triple.  Streams for distinct keys are independent and a key always
reproduces the same draws, so results never depend on scheduling.
"""
from __future__ import annotations

import hashlib

import numpy as np

RngStream = np.random.Generator


def tag_to_int(tag: str) -> int:
    digest = hashlib.blake2b(tag.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def split_stream(seed: int, replicate_index: int = 0, tag: str = "") -> RngStream:
    """Return the stream for ``(seed, replicate_index, tag)``."""
    if seed < 0 or replicate_index < 0:
        raise ValueError("seed and replicate index must be nonnegative")
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, int(replicate_index), tag_to_int(tag)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def spawn(stream: RngStream, n: int) -> list[RngStream]:
    """Split ``n`` independent child streams off ``stream``."""
    return stream.spawn(n)
