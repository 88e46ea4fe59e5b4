"""Counter-based random substreams shared by the numba and numpy kernels.

Each replica owns a 64-bit stream key derived from the master seed. A draw
advances the key by the golden-ratio increment and finalizes it with the
splitmix64 mixer, so streams are cheap, stateless to fork, and produce the
same bits no matter which backend consumes them.
"""

from __future__ import annotations

import numpy as np

GOLD = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_SALT = np.uint64(0x8E1F0653D4B0A95B)
_U64 = np.uint64
_TO_UNIT = 1.0 / 9007199254740992.0  # 2**-53


def mix64(z: np.ndarray | np.uint64) -> np.ndarray | np.uint64:
    """splitmix64 finalizer; accepts a uint64 scalar or array."""
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _U64(30))) * _MIX1
        z = (z ^ (z >> _U64(27))) * _MIX2
    return z ^ (z >> _U64(31))


def stream_keys(seed: int, n: int, offset: int = 0) -> np.ndarray:
    """Stream keys for replicas ``offset .. offset+n-1`` under ``seed``."""
    base = mix64(_U64(seed & 0xFFFFFFFFFFFFFFFF) ^ _SALT)
    idx = np.arange(offset, offset + n, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(base + GOLD * (idx + _U64(1)))


def next_uniform(key: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Advance an array of stream keys one draw; return (uniforms, new keys)."""
    with np.errstate(over="ignore"):
        key = key + GOLD
        u = (mix64(key) >> _U64(11)).astype(np.float64) * _TO_UNIT
    return u, key
