"""Deterministic random stream shared by every seeded component.

The generator is splitmix64 used in counter mode: draw ``i`` of stream
``seed`` is ``mix64(seed + (i + 1) * GOLDEN)`` where ``mix64`` is the
standard splitmix64 finalizer. Counter mode means the scalar generator used
by the sampling decoders and the vectorized generator used by the image
corruptions produce bit-identical streams, and any draw can be computed
without generating its predecessors. The stream is fully specified here so
results are reproducible across platforms and numpy versions; ``random`` and
``numpy.random`` are deliberately not used for anything seeded.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# 2**-53: scales a 53-bit integer into [0, 1).
_INV_2_53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    """splitmix64 finalizer on a 64-bit integer."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


class Rng:
    """Scalar view of the stream: stateful counter over ``mix64``.

    ``uniform()`` returns a double in [0, 1) built from the top 53 bits,
    exactly ``(next_u64() >> 11) * 2**-53``. One decoder draw consumes
    exactly one ``uniform()`` call; callers document their draw counts.
    """

    def __init__(self, seed: int):
        self._seed = seed & _MASK64
        self._count = 0

    @property
    def draws(self) -> int:
        """Number of 64-bit outputs consumed so far."""
        return self._count

    def next_u64(self) -> int:
        self._count += 1
        return mix64(self._seed + self._count * _GOLDEN)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * _INV_2_53

    def below(self, n: int) -> int:
        """Integer in [0, n) as floor(uniform() * n). n must be positive.

        The floor construction has negligible bias for the small n used
        here and keeps the draw count at exactly one per call.
        """
        if n <= 0:
            raise ValueError(f"below() needs a positive bound, got {n}")
        v = int(self.uniform() * n)
        return n - 1 if v >= n else v


def u64_block(seed: int, count: int, offset: int = 0) -> np.ndarray:
    """Draws ``offset`` .. ``offset+count-1`` of stream ``seed``, vectorized.

    ``u64_block(s, n)[i]`` equals the (offset+i)-th ``next_u64()`` of
    ``Rng(s)``. uint64 arithmetic wraps mod 2**64, which is exactly the
    masking the scalar path applies.
    """
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    idx = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
    z = np.uint64(seed & _MASK64) + idx * np.uint64(_GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def uniform_block(seed: int, count: int, offset: int = 0) -> np.ndarray:
    """Vectorized doubles in [0, 1), matching ``Rng.uniform`` draw for draw."""
    return (u64_block(seed, count, offset) >> np.uint64(11)).astype(np.float64) * _INV_2_53


def byte_block(seed: int, count: int, offset: int = 0) -> np.ndarray:
    """Vectorized uint8 draws: the top byte of each 64-bit output."""
    return (u64_block(seed, count, offset) >> np.uint64(56)).astype(np.uint8)
