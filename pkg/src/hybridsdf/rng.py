"""Counter-based random numbers: every draw is a pure function of its keys."""
from __future__ import annotations

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True, inline="always")
def mix64(z):
    """splitmix64 finalizer."""
    z = np.uint64(z)
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True, inline="always")
def hash4(seed, a, b, c):
    h = mix64(np.uint64(seed) + _GOLDEN)
    h = mix64(h ^ np.uint64(a))
    h = mix64(h ^ np.uint64(b))
    h = mix64(h ^ np.uint64(c))
    return h


@njit(cache=True, inline="always")
def uniform(seed, a, b, c):
    """Uniform double in [0, 1) keyed by (seed, a, b, c)."""
    return float(hash4(seed, a, b, c) >> _S11) * _INV53


def uniform_py(seed: int, a: int, b: int, c: int) -> float:
    return float(uniform(np.uint64(seed % 2**64), np.uint64(a), np.uint64(b), np.uint64(c)))
