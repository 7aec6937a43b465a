"""Reproducible random streams.

Every randomized quantity in ghostkit is drawn from a :class:`RandomStream`
identified by ``(seed, stream)``. The generator is xoshiro256** run over
``LANES`` independent lanes; lane ``l`` is seeded with four splitmix64
outputs started from ``seed + stream_key * 0xD1B54A32D192ED03`` xor
``l * 0x9E3779B97F4A7C15``. A block of output holds one value per lane, and
values are consumed block after block, lane by lane.

Derived distributions:

* uniform doubles: ``(u >> 11) * 2**-53``
* normals: Box-Muller on pairs ``(1 - u1, u2)``, cosine branch first
* Poisson: inversion for ``lam < 10``, PTRS transformed rejection otherwise
* permutations: stable argsort of fresh 64-bit keys
"""

import hashlib
from typing import Union

import numpy as np
from scipy.special import gammaln

from ghostkit.errors import ConfigError

LANES = 1024
POISSON_INVERSION_LIMIT = 10.0

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_STREAM_MIX = 0xD1B54A32D192ED03


def stream_key(stream: Union[int, str]) -> int:
    """Map a stream name to a 64-bit key (integers pass through)."""
    if isinstance(stream, int):
        return stream & _MASK64
    digest = hashlib.blake2b(stream.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _rotl(x: np.ndarray, k: int) -> np.ndarray:
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


def _splitmix64(state: np.ndarray) -> tuple:
    state = state + np.uint64(_GOLDEN)
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return state, z ^ (z >> np.uint64(31))


class RandomStream:
    """Deterministic stream of random numbers for one ``(seed, stream)`` pair."""

    def __init__(self, seed: int, stream: Union[int, str] = 0):
        if seed < 0:
            raise ConfigError(f"seed must be non-negative, got {seed}")
        self.seed = int(seed)
        self.stream = stream
        base = (self.seed + stream_key(stream) * _STREAM_MIX) & _MASK64
        lanes = np.arange(LANES, dtype=np.uint64) * np.uint64(_GOLDEN)
        sm = np.uint64(base) ^ lanes
        words = []
        for _ in range(4):
            sm, out = _splitmix64(sm)
            words.append(out)
        self._state = np.stack(words)
        self._buffer = np.empty(0, dtype=np.uint64)

    def _next_block(self) -> np.ndarray:
        s0, s1, s2, s3 = self._state
        result = _rotl(s1 * np.uint64(5), 7) * np.uint64(9)
        t = s1 << np.uint64(17)
        s2 = s2 ^ s0
        s3 = s3 ^ s1
        s1 = s1 ^ s2
        s0 = s0 ^ s3
        s2 = s2 ^ t
        s3 = _rotl(s3, 45)
        self._state = np.stack([s0, s1, s2, s3])
        return result

    def uint64(self, n: int) -> np.ndarray:
        """Next ``n`` raw 64-bit outputs."""
        n = int(n)
        if n < 0:
            raise ConfigError(f"cannot draw {n} values")
        missing = n - self._buffer.size
        if missing > 0:
            blocks = [self._buffer]
            for _ in range(-(-missing // LANES)):
                blocks.append(self._next_block())
            self._buffer = np.concatenate(blocks)
        out, self._buffer = self._buffer[:n], self._buffer[n:]
        return out

    def uniform(self, n: int) -> np.ndarray:
        """``n`` doubles in ``[0, 1)``."""
        return (self.uint64(n) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)

    def normal(self, n: int) -> np.ndarray:
        """``n`` standard normal draws."""
        pairs = -(-int(n) // 2)
        u1 = 1.0 - self.uniform(pairs)
        u2 = self.uniform(pairs)
        radius = np.sqrt(-2.0 * np.log(u1))
        z = np.empty(2 * pairs, dtype=np.float64)
        z[0::2] = radius * np.cos(2.0 * np.pi * u2)
        z[1::2] = radius * np.sin(2.0 * np.pi * u2)
        return z[:n]

    def permutation(self, n: int) -> np.ndarray:
        """A uniformly random permutation of ``range(n)``."""
        return np.argsort(self.uint64(n), kind="stable")

    def poisson(self, lam: np.ndarray) -> np.ndarray:
        """Poisson draws with means ``lam`` (same shape, int64)."""
        lam = np.asarray(lam, dtype=np.float64)
        if np.any(lam < 0) or not np.all(np.isfinite(lam)):
            raise ConfigError("Poisson means must be finite and non-negative")
        flat = lam.ravel()
        out = np.zeros(flat.shape, dtype=np.int64)
        small = np.flatnonzero((flat > 0) & (flat < POISSON_INVERSION_LIMIT))
        large = np.flatnonzero(flat >= POISSON_INVERSION_LIMIT)
        if small.size:
            out[small] = self._poisson_inversion(flat[small])
        if large.size:
            out[large] = self._poisson_ptrs(flat[large])
        return out.reshape(lam.shape)

    def _poisson_inversion(self, lam: np.ndarray) -> np.ndarray:
        u = self.uniform(lam.size)
        k = np.zeros(lam.size, dtype=np.int64)
        p = np.exp(-lam)
        cdf = p.copy()
        active = u > cdf
        while np.any(active):
            idx = np.flatnonzero(active)
            k[idx] += 1
            p[idx] *= lam[idx] / k[idx]
            cdf[idx] += p[idx]
            # cdf saturates below u only through rounding once p underflows
            active = (u > cdf) & (p > 0)
        return k

    def _poisson_ptrs(self, lam: np.ndarray) -> np.ndarray:
        slam = np.sqrt(lam)
        loglam = np.log(lam)
        b = 0.931 + 2.53 * slam
        a = -0.059 + 0.02483 * b
        invalpha = 1.1239 + 1.1328 / (b - 3.4)
        vr = 0.9277 - 3.6224 / (b - 2.0)

        out = np.zeros(lam.size, dtype=np.int64)
        pending = np.arange(lam.size)
        while pending.size:
            draws = self.uniform(2 * pending.size)
            u = draws[0::2] - 0.5
            v = draws[1::2]
            us = 0.5 - np.abs(u)
            ap, bp, lp = a[pending], b[pending], lam[pending]
            k = np.floor((2.0 * ap / us + bp) * u + lp + 0.43)

            quick = (us >= 0.07) & (v <= vr[pending])
            reject = (k < 0) | ((us < 0.013) & (v > us))
            with np.errstate(divide="ignore", invalid="ignore"):
                lhs = np.log(v) + np.log(invalpha[pending]) - np.log(ap / (us * us) + bp)
                rhs = -lp + k * loglam[pending] - gammaln(k + 1.0)
            slow = ~quick & ~reject & (lhs <= rhs)
            accepted = quick | slow
            out[pending[accepted]] = k[accepted].astype(np.int64)
            pending = pending[~accepted]
        return out
