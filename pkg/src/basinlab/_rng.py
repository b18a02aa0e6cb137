"""Counter-based random streams.

Every random quantity in basinlab is addressed by a 64-bit stream key and an
integer index, so symbol ``i`` of a lazily extended word is a pure function of
``(key, i)``.  Trajectory ensembles derive one key per trajectory, which makes
results independent of how the work is split across threads.

The generator is SplitMix64 evaluated at an arbitrary position of its state
sequence.
"""

from __future__ import annotations

import numpy as np
from numba import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_SALT = np.uint64(0xD1B54A32D192ED03)

# stream ids used when deriving per-trajectory keys
STREAM_BASE = 1
STREAM_ETA = 2
STREAM_XI = 3
STREAM_ZETA = 4
STREAM_START = 5
STREAM_AUX = 6


@njit(cache=True)
def mix64(z):
    z = np.uint64(z)
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def derive(seed, a, b):
    """Key for sub-stream ``(a, b)`` of ``seed``."""
    k = mix64(np.uint64(seed) ^ _SALT)
    k = mix64(k ^ mix64(np.uint64(a) + GOLDEN))
    k = mix64(k ^ mix64(np.uint64(b) * GOLDEN + _SALT))
    return k


@njit(cache=True)
def raw(key, i):
    return mix64(np.uint64(key) + (np.uint64(i) + np.uint64(1)) * GOLDEN)


@njit(cache=True)
def uniform(key, i):
    """Uniform variate in [0, 1) at position ``i`` of stream ``key``."""
    return np.float64(raw(key, i) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def symbol(key, i, k):
    """Uniform symbol in ``range(k)`` at position ``i``."""
    h = raw(key, i) >> np.uint64(32)
    return np.int64((h * np.uint64(k)) >> np.uint64(32))


@njit(cache=True)
def key_as_int(key):
    return np.int64(np.uint64(key))


@njit(cache=True)
def derive_many(seed, stream, n, offset):
    out = np.empty(n, dtype=np.int64)
    for j in range(n):
        out[j] = np.int64(derive(seed, stream, offset + j))
    return out


def as_seed(seed: int) -> np.uint64:
    if not 0 <= int(seed) < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.uint64(int(seed))


def trajectory_keys(seed: int, stream: int, n: int, offset: int = 0) -> np.ndarray:
    """Keys (stored as int64 bit patterns) for trajectories ``offset..offset+n-1``."""
    return derive_many(as_seed(seed), np.uint64(stream), n, offset)


class Stream:
    """Sequential view of a counter-based stream.

    ``consumed`` counts the variates drawn so far; the pair (key, consumed)
    fully determines everything that follows.
    """

    def __init__(self, seed: int, stream: int = STREAM_AUX, index: int = 0):
        self.key = np.uint64(derive(as_seed(seed), np.uint64(stream), np.uint64(index)))
        self.consumed = 0

    def uniform(self) -> float:
        u = float(uniform(self.key, self.consumed))
        self.consumed += 1
        return u

    def uniforms(self, n: int) -> np.ndarray:
        out = _uniform_block(self.key, self.consumed, n)
        self.consumed += n
        return out


@njit(cache=True)
def _uniform_block(key, start, n):
    out = np.empty(n)
    for j in range(n):
        out[j] = uniform(key, start + j)
    return out


@njit(cache=True)
def symbols_block(key, start, n, k):
    out = np.empty(n, dtype=np.int64)
    for j in range(n):
        out[j] = symbol(key, start + j, k)
    return out


@njit(cache=True)
def bernoulli_block(key, start, n, cum):
    """Symbols drawn with cumulative probabilities ``cum`` (last entry 1)."""
    out = np.empty(n, dtype=np.int64)
    m = cum.shape[0]
    for j in range(n):
        u = uniform(key, start + j)
        s = 0
        while s < m - 1 and u >= cum[s]:
            s += 1
        out[j] = s
    return out
