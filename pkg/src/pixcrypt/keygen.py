"""Keystream expansion from a 64-bit master seed using SplitMix64."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from pixcrypt.errors import ArgumentError

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

CHANNEL_R, CHANNEL_G, CHANNEL_B, CHANNEL_SHUFFLE = range(4)


def splitmix64_next(state: int) -> Tuple[int, int]:
    """Return ``(value, new_state)`` for one SplitMix64 step."""
    state = (state + GOLDEN_GAMMA) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31), state


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def splitmix64_stream(seed, count: int) -> np.ndarray:
    """First ``count`` SplitMix64 outputs from ``seed``.

    ``seed`` may be an int or a uint64 array; for an array of shape ``S`` the
    result has shape ``S + (count,)``. Output ``j`` is ``mix(seed + (j+1)*gamma)``,
    which is what iterating :func:`splitmix64_next` yields.
    """
    seeds = np.asarray(seed, dtype=np.uint64)[..., None]
    steps = np.arange(1, count + 1, dtype=np.uint64) * np.uint64(GOLDEN_GAMMA)
    return _mix(seeds + steps)


class SplitMix64:
    """Stateful SplitMix64 generator for sequential draws (e.g. shuffling)."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next(self) -> int:
        value, self.state = splitmix64_next(self.state)
        return value

    def below(self, bound: int) -> int:
        return self.next() % bound

    def permutation(self, n: int) -> List[int]:
        """Fisher-Yates shuffle of ``range(n)``, swapping from the top down."""
        order = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.below(i + 1)
            order[i], order[j] = order[j], order[i]
        return order


class KeyPolicy(enum.Enum):
    SAME_KEY = "same"
    PER_IMAGE_KEYS = "per-image"

    @classmethod
    def parse(cls, text: str) -> "KeyPolicy":
        try:
            return cls(text)
        except ValueError:
            raise ArgumentError(f"unknown key policy {text!r}; expected 'same' or 'per-image'") from None


@dataclass(frozen=True)
class MasterKey:
    seed: int

    def __post_init__(self):
        if not 0 <= self.seed <= MASK64:
            raise ArgumentError(f"master seed {self.seed} is not a 64-bit unsigned value")

    @classmethod
    def parse(cls, text: str) -> "MasterKey":
        return cls(parse_seed(text))


def parse_seed(text: str) -> int:
    """Parse a decimal or ``0x``-prefixed hex 64-bit seed."""
    text = text.strip()
    try:
        value = int(text, 16) if text.lower().startswith("0x") else int(text, 10)
    except ValueError:
        raise ArgumentError(f"cannot parse seed {text!r}") from None
    if not 0 <= value <= MASK64:
        raise ArgumentError(f"seed {text!r} does not fit in 64 bits")
    return value


@dataclass(frozen=True, eq=False)
class Keystream:
    """Per-pixel flip bits ``flips[channel, j]`` and shuffle integers ``shuffles[j]``."""

    flips: np.ndarray
    shuffles: np.ndarray

    def __post_init__(self):
        flips = np.ascontiguousarray(self.flips, dtype=np.uint8)
        shuffles = np.ascontiguousarray(self.shuffles, dtype=np.uint8)
        if flips.ndim != 2 or flips.shape[0] != 3:
            raise ArgumentError(f"flips must have shape (3, n), got {flips.shape}")
        if shuffles.shape != (flips.shape[1],):
            raise ArgumentError("flips and shuffles lengths differ")
        if flips.shape[1] < 1:
            raise ArgumentError("keystream must cover at least one pixel")
        if flips.max() > 1 or shuffles.max() > 5:
            raise ArgumentError("flips must be 0/1 and shuffles in 0..5")
        flips.setflags(write=False)
        shuffles.setflags(write=False)
        object.__setattr__(self, "flips", flips)
        object.__setattr__(self, "shuffles", shuffles)

    @property
    def n(self) -> int:
        return self.shuffles.shape[0]

    @classmethod
    def zeros(cls, n: int) -> "Keystream":
        return cls(np.zeros((3, n), np.uint8), np.zeros(n, np.uint8))

    def __eq__(self, other):
        if not isinstance(other, Keystream):
            return NotImplemented
        return bool(np.array_equal(self.flips, other.flips) and np.array_equal(self.shuffles, other.shuffles))

    def __hash__(self):
        return hash((self.flips.tobytes(), self.shuffles.tobytes()))


def substream_seed(master: MasterKey, image_index: int, channel_id: int) -> int:
    value, _ = splitmix64_next((image_index * 4 + channel_id) & MASK64)
    return master.seed ^ value


def derive_keystream(master: MasterKey, image_index: int, width: int, height: int) -> Keystream:
    n = width * height
    if width < 1 or height < 1:
        raise ArgumentError(f"cannot derive a keystream for a {width}x{height} image")
    flips = np.empty((3, n), dtype=np.uint8)
    for c in (CHANNEL_R, CHANNEL_G, CHANNEL_B):
        stream = splitmix64_stream(substream_seed(master, image_index, c), n)
        flips[c] = (stream & np.uint64(1)).astype(np.uint8)
    stream = splitmix64_stream(substream_seed(master, image_index, CHANNEL_SHUFFLE), n)
    shuffles = (stream % np.uint64(6)).astype(np.uint8)
    return Keystream(flips, shuffles)


def keys_for_dataset(master: MasterKey, policy: KeyPolicy, count: int, offset: int = 0) -> List[int]:
    """Effective image indices for ``count`` images under ``policy``.

    Under per-image keys, image ``i`` uses index ``offset + i``; a non-zero
    offset gives a block of indices disjoint from another set's.
    """
    if count < 1:
        raise ArgumentError("count must be at least 1")
    if policy is KeyPolicy.SAME_KEY:
        return [0] * count
    return [offset + i for i in range(count)]
