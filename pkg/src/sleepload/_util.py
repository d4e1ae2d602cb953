"""Small shared helpers: seed derivation and CSV float formatting."""

from __future__ import annotations

import zlib

import numpy as np


def derive_seed(*parts) -> int:
    """Deterministically fold seed components into one integer seed.

    Accepts ints and short strings; strings are hashed with crc32 so the
    result does not depend on the process hash seed.
    """
    words = []
    for part in parts:
        if isinstance(part, str):
            words.append(zlib.crc32(part.encode("utf-8")))
        elif isinstance(part, (int, np.integer)):
            words.append(int(part) & 0xFFFFFFFFFFFFFFFF)
        else:
            raise TypeError(f"seed parts must be int or str, got {type(part)!r}")
    return int(np.random.SeedSequence(words).generate_state(1, np.uint64)[0])


def format_float(value: float) -> str:
    """Format a float for CSV output (12 significant digits, stable across runs)."""
    return format(float(value), ".12g")
