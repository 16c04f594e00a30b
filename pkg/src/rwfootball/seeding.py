"""Deterministic stream derivation.

Every random draw in the package comes from a generator built by
:func:`derive_rng`.  A stream is identified by the master seed plus a path
of keys, e.g. ``(seed, "bias-variance-vs-K", cell, m, b)``.  String keys
are hashed to stable 32-bit integers so paths never depend on Python's
randomized ``hash``.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["stream_key", "derive_seed_sequence", "derive_rng"]


def stream_key(key) -> int:
    """Map an int or str path component to a non-negative integer."""
    if isinstance(key, (bool, np.bool_)):
        raise TypeError("boolean stream keys are ambiguous")
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError(f"stream keys must be non-negative, got {key}")
        return int(key)
    if isinstance(key, str):
        digest = hashlib.sha256(key.encode("utf-8")).digest()
        return int.from_bytes(digest[:4], "little")
    raise TypeError(f"unsupported stream key type {type(key).__name__}")


def derive_seed_sequence(seed: int, *path) -> np.random.SeedSequence:
    return np.random.SeedSequence(
        entropy=stream_key(seed), spawn_key=tuple(stream_key(k) for k in path)
    )


def derive_rng(seed: int, *path) -> np.random.Generator:
    """Independent generator for the stream ``seed/path[0]/path[1]/...``."""
    return np.random.Generator(np.random.PCG64(derive_seed_sequence(seed, *path)))
