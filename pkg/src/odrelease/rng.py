"""Deterministic labelled random substreams.

Every randomized operation takes an integer seed and derives independent
counter-based (Philox) streams from (seed, label, ...) paths.  Streams are
keyed by a hash of the path, so they do not depend on the order in which
they are created: toggling one pipeline stage never perturbs the randomness
of another, and per-bucket streams can be drawn concurrently.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _digest(seed: int, labels: tuple) -> bytes:
    parts = [repr(int(seed))]
    parts.extend(repr(lab) for lab in labels)
    return hashlib.blake2b("\x1f".join(parts).encode("utf8"), digest_size=16).digest()


def substream(seed: int, *labels) -> np.random.Generator:
    """Independent generator for the given seed and label path.

    Labels may be strings, ints, or floats; their repr() feeds the hash, so
    the stream is stable across runs and platforms.
    """
    key = int.from_bytes(_digest(seed, labels), "big")
    return np.random.Generator(np.random.Philox(key=key))


def derive_seed(seed: int, *labels) -> int:
    """Stable 63-bit child seed for APIs that take a plain integer seed."""
    return int.from_bytes(_digest(seed, labels), "big") >> 65
