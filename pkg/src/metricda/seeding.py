"""Deterministic per-repetition random streams."""
from __future__ import annotations

import zlib

import numpy as np

__all__ = ["stream_key", "rep_rngs"]


def stream_key(name: str) -> int:
    """Stable 32-bit integer for a stream label."""
    return zlib.crc32(name.encode())


def rep_rngs(seed: int, reps, label: str = "") -> list[np.random.Generator]:
    """One generator per repetition index, keyed by ``(seed, rep, label)``.

    ``reps`` is a count or an iterable of global repetition indices, so a
    chunk of repetitions gets the same streams however the work is split.
    """
    idx = range(reps) if isinstance(reps, (int, np.integer)) else reps
    key = stream_key(label)
    return [np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), int(r), key])) for r in idx]
