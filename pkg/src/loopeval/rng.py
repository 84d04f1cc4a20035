"""Deterministic pseudo-randomness for the whole toolkit.

Everything that needs randomness (k-means++ seeding, score-split shuffles,
loop synthesis) draws from xoshiro256** so that identical seeds give
bit-identical results on every platform.  numpy's own generators are never
used outside the test suite.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15


def splitmix64_mix(x: int) -> int:
    """Finalizer of the splitmix64 stream: a 64-bit mixing hash.

    Also used on its own for seed splitting (deriving independent stream
    seeds from a base seed plus an index).
    """
    z = x & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def split_seed(seed: int, index: int) -> int:
    """Derive the seed of substream `index` from a base seed."""
    return splitmix64_mix((seed + (index + 1) * _SPLITMIX_GAMMA) & _MASK64)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256StarStar:
    """Scalar xoshiro256** generator, seeded via the splitmix64 stream."""

    def __init__(self, seed: int):
        s = seed & _MASK64
        state = []
        for _ in range(4):
            s = (s + _SPLITMIX_GAMMA) & _MASK64
            state.append(splitmix64_mix(s))
        if not any(state):  # all-zero state is the one invalid state
            state[0] = 1
        self._s = state

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def random(self) -> float:
        """Uniform double in [0, 1) with 53-bit resolution."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randbelow(self, n: int) -> int:
        """Unbiased integer in [0, n) by rejection sampling."""
        if n <= 0:
            raise ValueError("randbelow needs n >= 1")
        limit = ((1 << 64) // n) * n
        u = self.next_u64()
        while u >= limit:
            u = self.next_u64()
        return u % n

    def shuffle(self, items) -> None:
        """In-place Fisher-Yates shuffle of a mutable sequence or 1-D array."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def choice(self, items):
        return items[self.randbelow(len(items))]


# -- vectorized lanes ---------------------------------------------------------
#
# Noise bursts need tens of thousands of draws; a pure-Python loop would
# dominate synthesis time.  `noise` runs W interleaved xoshiro256** lanes with
# numpy uint64 arithmetic: sample i comes from lane i % W at step i // W, and
# lane init states are consecutive outputs of the splitmix64 stream of the
# burst seed.  Deterministic and platform-independent like the scalar path.

_U = np.uint64


def _mix_vec(x: np.ndarray) -> np.ndarray:
    z = x
    z = (z ^ (z >> _U(30))) * _U(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U(27))) * _U(0x94D049BB133111EB)
    return z ^ (z >> _U(31))


def _rotl_vec(x: np.ndarray, k: int) -> np.ndarray:
    return (x << _U(k)) | (x >> _U(64 - k))


def noise(seed: int, n: int, lanes: int = 64) -> np.ndarray:
    """`n` uniform samples in [-1, 1) from xoshiro256** lanes keyed by `seed`."""
    if n <= 0:
        return np.zeros(0)
    k = np.arange(1, 4 * lanes + 1, dtype=np.uint64)
    words = _mix_vec(_U(seed & _MASK64) + k * _U(_SPLITMIX_GAMMA))
    state = words.reshape(lanes, 4).T.copy()
    dead = ~np.any(state, axis=0)
    if dead.any():
        state[0, dead] = _U(1)
    s0, s1, s2, s3 = state[0], state[1], state[2], state[3]

    rounds = -(-n // lanes)
    out = np.empty((rounds, lanes), dtype=np.uint64)
    for r in range(rounds):
        out[r] = _rotl_vec(s1 * _U(5), 7) * _U(9)
        t = s1 << _U(17)
        s2 = s2 ^ s0
        s3 = s3 ^ s1
        s1 = s1 ^ s2
        s0 = s0 ^ s3
        s2 = s2 ^ t
        s3 = _rotl_vec(s3, 45)
    u = out.reshape(-1)[:n]
    return ((u >> _U(11)) * 2.0**-53) * 2.0 - 1.0
