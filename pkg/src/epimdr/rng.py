"""Portable counter-based SplitMix64 streams.

Every draw is a pure function of ``(seed, stream, counter)``, so generated
cohorts and fold plans are identical on every platform and numpy version.
"""

from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def splitmix64(state: int) -> tuple[int, int]:
    """One step of the reference SplitMix64: returns ``(new_state, output)``."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def derive_seed(seed: int, *labels: int) -> int:
    """Hash a seed and a path of integer labels into an independent stream seed."""
    state = seed & _MASK64
    for label in labels:
        state, out = splitmix64(state ^ (label & _MASK64))
        state = out
    return state


class SplitMix64:
    """Sequential SplitMix64 stream with vectorised block draws."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self, n: int) -> np.ndarray:
        with np.errstate(over="ignore"):
            counters = np.arange(1, n + 1, dtype=np.uint64)
            z = np.uint64(self._state) + counters * _GAMMA
            out = _mix(z)
        self._state = (self._state + n * 0x9E3779B97F4A7C15) & _MASK64
        return out

    def uniform(self, n: int) -> np.ndarray:
        """Doubles in [0, 1) from the top 53 bits."""
        return (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))

    def integers(self, n: int, high: int) -> np.ndarray:
        """Integers in ``[0, high)``."""
        return np.minimum((self.uniform(n) * high).astype(np.int64), high - 1)

    def permutation(self, n: int) -> np.ndarray:
        keys = self.next_u64(n)
        return np.argsort(keys, kind="stable")
