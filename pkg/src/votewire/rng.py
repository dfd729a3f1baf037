"""Counter-based SplitMix64 generator.

Every draw is a pure function of ``(key, counter)``::

    z  = key + (counter + 1) * 0x9E3779B97F4A7C15      (mod 2**64)
    z  = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z  = (z ^ (z >> 27)) * 0x94D049BB133111EB
    out = z ^ (z >> 31)

which is the SplitMix64 output function evaluated at an arbitrary position
of its Weyl sequence.  Substreams are keyed with ``derive_key(seed, *ids)``
so each voting center draws from its own stream regardless of how
generation is scheduled.  Uniforms use the top 53 bits, so they are exact
binary fractions on every platform.
"""

from __future__ import annotations

import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
MASK64 = (1 << 64) - 1
_TWO_NEG_53 = 2.0 ** -53


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def derive_key(seed: int, *ids: int) -> int:
    key = mix64(seed & MASK64)
    for i in ids:
        key = mix64(key ^ mix64((i * GOLDEN + 0x632BE59BD9B4E019) & MASK64))
    return key


def derive_keys(seed: int, prefix, ids) -> np.ndarray:
    """Vectorized ``derive_key(seed, *prefix, i)`` over an array of ids."""
    base = derive_key(seed, *prefix)
    ids = np.asarray(ids, dtype=np.uint64)
    with np.errstate(over="ignore"):
        inner = _mix64_array(ids * np.uint64(GOLDEN) + np.uint64(0x632BE59BD9B4E019))
        return _mix64_array(np.uint64(base) ^ inner)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
    return z ^ (z >> np.uint64(31))


def bits(keys, counters) -> np.ndarray:
    """Raw 64-bit outputs, broadcasting ``keys`` against ``counters``."""
    keys = np.asarray(keys, dtype=np.uint64)
    counters = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = keys + (counters + np.uint64(1)) * np.uint64(GOLDEN)
        return _mix64_array(z)


def uniform(keys, counters) -> np.ndarray:
    """Uniforms in [0, 1)."""
    return (bits(keys, counters) >> np.uint64(11)).astype(np.float64) * _TWO_NEG_53


def uniform_open(keys, counters) -> np.ndarray:
    """Uniforms in (0, 1); safe for logarithms and inverse CDFs."""
    return ((bits(keys, counters) >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_NEG_53


def normal(keys, counters) -> np.ndarray:
    """Standard normals by Box-Muller; consumes counters ``2c`` and ``2c+1``."""
    counters = np.asarray(counters, dtype=np.uint64)
    u1 = uniform_open(keys, counters * np.uint64(2))
    u2 = uniform(keys, counters * np.uint64(2) + np.uint64(1))
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def categorical(keys, counters, probs) -> np.ndarray:
    """Index draws from a discrete distribution (inverse-CDF on the grid)."""
    cdf = np.cumsum(np.asarray(probs, dtype=np.float64))
    cdf /= cdf[-1]
    u = uniform(keys, counters)
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)


class Stream:
    """Sequential convenience view of one keyed substream."""

    def __init__(self, seed: int, *ids: int):
        self.key = derive_key(seed, *ids)
        self.counter = 0

    def _take(self, n):
        c = np.arange(self.counter, self.counter + n, dtype=np.uint64)
        self.counter += n
        return c

    def uniform(self, n=None):
        out = uniform(self.key, self._take(1 if n is None else n))
        return float(out[0]) if n is None else out

    def normal(self, n=None, mean=0.0, std=1.0):
        out = mean + std * normal(self.key, self._take(1 if n is None else n))
        return float(out[0]) if n is None else out

    def integers(self, low, high, n=None):
        """Integers in [low, high)."""
        span = np.uint64(high - low)
        out = (bits(self.key, self._take(1 if n is None else n)) % span).astype(np.int64) + low
        return int(out[0]) if n is None else out
