"""Deterministic RNG derivation.

Every random draw in the package flows from one integer seed through
`rng_from`, which hashes a mixed tuple of ints and string tags into a
SeedSequence. Independent call sites get independent, reproducible
streams regardless of evaluation order.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def seed_words(*parts: int | str) -> tuple[int, ...]:
    """Map a mixed tuple of ints/strings to non-negative 64-bit words."""
    words = []
    for part in parts:
        if isinstance(part, str):
            words.append(zlib.crc32(part.encode("utf-8")))
        else:
            words.append(int(part) & _MASK64)
    return tuple(words)


def rng_from(*parts: int | str) -> np.random.Generator:
    """Build a Generator keyed by the given parts, order-sensitive."""
    return np.random.default_rng(np.random.SeedSequence(seed_words(*parts)))
