"""Portable deterministic sampling: the probe-sampler-v1 scheme.

Draws must be reproducible bit-for-bit by any implementation in any
language, so nothing here depends on a host library's RNG.  The scheme:

  generator     splitmix64 (Steele et al.), 64-bit state, additive
                constant 0x9E3779B97F4A7C15, finalizer mix64 below.
  streams       the generator for stream `i` under master seed `s` is
                seeded with  mix64(s) XOR mix64(i + 0x9E3779B97F4A7C15),
                giving independent per-class streams.
  bounded draw  rejection sampling on the top range of 2^64 so every
                value below the bound is exactly equally likely.
  subset draw   partial Fisher-Yates over [0, population); the first
                `count` slots after the partial shuffle are the sample.

Any change to these rules is a new scheme version.
"""
from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

SCHEME = "probe-sampler-v1"


def mix64(x: int) -> int:
    """splitmix64 output function: avalanche a 64-bit value."""
    z = x & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Minimal splitmix64 generator over 64-bit unsigned state."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return mix64(self._state)

    def next_below(self, bound: int) -> int:
        """Uniform draw in [0, bound), unbiased via rejection."""
        if bound <= 0:
            raise ValueError(f"bound must be positive, got {bound}")
        span = _MASK64 + 1
        limit = span - span % bound
        while True:
            v = self.next_u64()
            if v < limit:
                return v % bound


def stream(seed: int, stream_id: int) -> SplitMix64:
    """Generator for one independent stream under a master seed."""
    return SplitMix64(mix64(seed) ^ mix64(stream_id + _GOLDEN))


def sample_without_replacement(population: int, count: int, rng: SplitMix64) -> list[int]:
    """Draw `count` distinct values from [0, population), draw order."""
    if count < 0 or count > population:
        raise ValueError(f"cannot draw {count} from {population}")
    slots = list(range(population))
    for i in range(count):
        j = i + rng.next_below(population - i)
        slots[i], slots[j] = slots[j], slots[i]
    return slots[:count]
