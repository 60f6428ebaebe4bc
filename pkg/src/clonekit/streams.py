"""Counter-based RNG streams.

Every stochastic routine in this package draws from a Philox generator whose
key is derived by hashing ``(seed, *path)``, where the path is a sequence of
ints and strings (experiment id, replicate index, ...).  Streams for distinct
paths are statistically independent, so replicates can run in any order or in
parallel without changing results.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream_key(seed: int, *path: int | str) -> np.ndarray:
    """128-bit Philox key for ``(seed, *path)``, stable across platforms."""
    for part in path:
        if not isinstance(part, (int, str)):
            raise TypeError(f"stream path parts must be int or str, got {type(part)!r}")
    msg = repr((int(seed),) + tuple(path)).encode("utf-8")
    digest = hashlib.sha256(msg).digest()
    return np.frombuffer(digest[:16], dtype="<u8")


def stream(seed: int, *path: int | str) -> np.random.Generator:
    """Independent generator keyed by ``(seed, *path)``."""
    return np.random.Generator(np.random.Philox(key=stream_key(seed, *path)))
