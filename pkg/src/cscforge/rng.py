"""Deterministic, splittable random streams.

Every random draw in this package flows through :class:`Rng`, a counter-mode
SplitMix64 stream: the i-th raw word of the stream with key ``seed`` is

    mix64(seed + i * 0x9E3779B97F4A7C15)

where ``mix64`` is the SplitMix64 finalizer (Steele, Lea & Flood 2014; the
same mixer xoshiro uses for seeding).  Counter mode makes the stream
stateless apart from a draw counter, so identical seeds give bit-identical
uint64 streams on every platform.

Derived values use fixed, documented transforms of that stream:

* uniforms: the top 53 bits, ``(w >> 11) * 2**-53``, in ``[0, 1)``;
* Gaussians: Box-Muller on consecutive word pairs, with the first word
  mapped into ``(0, 1]`` so the log is finite;
* permutations: stable argsort of per-index uniforms (ties, which occur
  with probability ~2**-53 per pair, resolve to the lower index);
* child streams (``split``): the next raw word becomes the child's seed.
"""

from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64_MASK = 0xFFFFFFFFFFFFFFFF


def _mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer on a uint64 array (wrapping arithmetic)."""
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class Rng:
    """Seedable, splittable deterministic generator.

    Parameters
    ----------
    seed : int
        Stream key; taken modulo 2**64.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _U64_MASK
        self._consumed = 0

    def __repr__(self):
        return f"Rng(seed={self.seed}, consumed={self._consumed})"

    def raw(self, count: int) -> np.ndarray:
        """Next `count` raw uint64 words of the stream."""
        if count < 0:
            raise ValueError("count must be nonnegative")
        start = self._consumed + 1
        idx = np.arange(start, start + count, dtype=np.uint64)
        self._consumed += count
        with np.errstate(over="ignore"):
            return _mix64(np.uint64(self.seed) + idx * _GAMMA)

    def uniform(self, count: int) -> np.ndarray:
        """`count` float64 uniforms in [0, 1)."""
        return (self.raw(count) >> np.uint64(11)) * 2.0**-53

    def normal(self, count: int) -> np.ndarray:
        """`count` float64 standard Gaussians via Box-Muller.

        Consumes an even number of raw words; the trailing draw of an odd
        request is discarded, so normal(3) and normal(4) agree on the first
        three values.
        """
        pairs = (count + 1) // 2
        w = self.raw(2 * pairs)
        # u1 in (0, 1] keeps the log finite; u2 in [0, 1).
        u1 = ((w[0::2] >> np.uint64(11)) + np.uint64(1)) * 2.0**-53
        u2 = (w[1::2] >> np.uint64(11)) * 2.0**-53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = (2.0 * np.pi) * u2
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:count]

    def permutation(self, n: int) -> np.ndarray:
        """Uniform random permutation of range(n)."""
        return np.argsort(self.uniform(n), kind="stable")

    def choose(self, n: int, k: int) -> np.ndarray:
        """`k` indices drawn uniformly from range(n) without replacement."""
        if k > n:
            raise ValueError(f"cannot choose {k} of {n} without replacement")
        return self.permutation(n)[:k]

    def split(self) -> "Rng":
        """Child stream keyed by the next raw word of this stream."""
        return Rng(int(self.raw(1)[0]))
