"""Counter-based random draws.

Every random decision inside a replication is a pure function of a 64-bit key
and the coordinates of the decision (period, slot, agent, purpose).  Keys are
derived with the SplitMix64 finalizer::

    fmix64(z):
        z += 0x9E3779B97F4A7C15
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB
        return z ^ (z >> 31)

    derive(key, label) = fmix64(key ^ fmix64(label))

A uniform variate on [0, 1) is taken from the top 53 bits of a key.  Because
draws are addressed by coordinates rather than consumed from a sequential
stream, the compiled kernel and the object-level reference path make identical
choices regardless of evaluation order.

Bulk draws (payoff tables, initial knowledge) use numpy's Philox-4x64
generator seeded from a derived key.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

MASK64 = (1 << 64) - 1

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)

# purpose labels
LANDSCAPE = 1
POPULATION = 2
PERIODS = 3
AUCTION = 11
DECIDE = 12
LEARN = 13
FORGET_FIRES = 0
FORGET_PICK = 1
LEARN_FIRES = 2
LEARN_PICK = 3


@njit(cache=True)
def fmix64(z):
    z = z + _GOLDEN
    z = (z ^ (z >> _S30)) * _MUL1
    z = (z ^ (z >> _S27)) * _MUL2
    return z ^ (z >> _S31)


@njit(cache=True)
def derive(key, label):
    return fmix64(key ^ fmix64(np.uint64(label)))


@njit(cache=True)
def unit(key):
    return float(key >> _S11) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def below(key, n):
    """Uniform integer in [0, n)."""
    return min(int(unit(key) * n), n - 1)


def mix(key: int, *labels: int) -> int:
    """Fold ``labels`` into ``key`` left to right; returns a Python int."""
    k = np.uint64(key & MASK64)
    for label in labels:
        k = np.uint64(derive(k, np.uint64(label & MASK64)))
    return int(k)


@dataclass(frozen=True)
class Stream:
    """Handle on one addressable random sub-stream."""

    key: int

    def child(self, *labels: int) -> "Stream":
        return Stream(mix(self.key, *labels))

    @property
    def u64(self) -> np.uint64:
        return np.uint64(self.key & MASK64)

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(self.key & MASK64))


def as_stream(rng) -> Stream:
    if isinstance(rng, Stream):
        return rng
    if isinstance(rng, (int, np.integer)):
        return Stream(int(rng) & MASK64)
    raise TypeError(f"expected a Stream or an integer key, got {type(rng).__name__}")
