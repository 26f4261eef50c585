"""SplitMix64 pseudo-random generator.

A tiny, fully specified 64-bit generator so that permutations and random
pattern draws are reproducible bit for bit on any platform:

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    return z ^ (z >> 31)

All arithmetic is modulo 2**64. Bounded draws use rejection sampling on the
raw 64-bit output, and permutations are Fisher-Yates shuffles driven by
bounded draws (index i swapped with a draw from [0, i]).
"""

from __future__ import annotations

import numpy as np
from numba import njit

GOLDEN_GAMMA = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)

_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_ZERO = np.uint64(0)


@njit(cache=True)
def splitmix_next(state):
    """Return (new_state, output) for one SplitMix64 step."""
    state = state + GOLDEN_GAMMA
    z = state
    z = (z ^ (z >> _S30)) * MIX1
    z = (z ^ (z >> _S27)) * MIX2
    return state, z ^ (z >> _S31)


@njit(cache=True)
def splitmix_bounded(state, n):
    """Uniform integer in [0, n) by rejection; returns (new_state, value)."""
    bound = np.uint64(n)
    # 2**64 mod n, computed without 128-bit arithmetic
    rem = (_ZERO - bound) % bound
    limit = _ZERO - rem  # 2**64 - rem, wraps to 0 when rem == 0
    while True:
        state, x = splitmix_next(state)
        if rem == _ZERO or x < limit:
            return state, np.int64(x % bound)


@njit(cache=True)
def splitmix_shuffle(state, arr):
    for i in range(arr.shape[0] - 1, 0, -1):
        state, j = splitmix_bounded(state, i + 1)
        tmp = arr[i]
        arr[i] = arr[j]
        arr[j] = tmp
    return state


class SplitMix64:
    """Stateful wrapper around the SplitMix64 kernels."""

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        self.state = np.uint64(self.seed % 2**64)

    # numba hands scalars back as Python ints; re-wrap so the next call is
    # compiled for uint64 rather than int64
    def next_u64(self) -> int:
        state, out = splitmix_next(self.state)
        self.state = np.uint64(state)
        return int(out)

    def bounded(self, n: int) -> int:
        if n < 1:
            raise ValueError(f"bound must be positive, got {n}")
        state, out = splitmix_bounded(self.state, n)
        self.state = np.uint64(state)
        return int(out)

    def permutation(self, n: int) -> np.ndarray:
        arr = np.arange(n, dtype=np.int64)
        self.shuffle(arr)
        return arr

    def shuffle(self, arr: np.ndarray) -> None:
        self.state = np.uint64(splitmix_shuffle(self.state, arr))
