"""Brute-force key-space sizes, plus exhaustive enumeration for tiny images."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from pixcrypt.cipher import EncryptionConfig
from pixcrypt.errors import ArgumentError, CapacityError
from pixcrypt.keygen import Keystream

MAX_ENUM_PIXELS_SHUFFLE = 3
MAX_ENUM_PIXELS_PLAIN = 6
EXACT_LIMIT = 64


@dataclass(frozen=True)
class KeySpaceReport:
    n: int
    log2_np: float
    log2_col: float
    log2_total: float
    exact: Optional[int] = None

    def csv_row(self) -> str:
        return f"{self.n},{self.log2_np:.6f},{self.log2_col:.6f},{self.log2_total:.6f}"


CSV_HEADER = "n,log2_np,log2_col,log2_total"


def pixel_count(width: int, height: int) -> int:
    if width < 1 or height < 1:
        raise ArgumentError(f"invalid dimensions {width}x{height}")
    return width * height


def keyspace_bits(n: int, cfg: EncryptionConfig, exact: bool = False) -> KeySpaceReport:
    """Key-space size in bits: ``3n`` for the flips, ``n*log2(6)`` more with shuffling.

    With ``exact=True`` and ``n <= 64`` the report also carries the exact count.
    """
    if n < 1:
        raise ArgumentError("n must be at least 1")
    log2_np = float(3 * n)
    log2_col = n * math.log2(6) if cfg.use_color_shuffle else 0.0
    count = None
    if exact and n <= EXACT_LIMIT:
        count = 2 ** (3 * n) * (6 ** n if cfg.use_color_shuffle else 1)
    return KeySpaceReport(n, log2_np, log2_col, log2_np + log2_col, count)


def enumerate_keystreams(n: int, cfg: EncryptionConfig) -> Iterator[Keystream]:
    """Yield every keystream for ``n`` pixels exactly once."""
    limit = MAX_ENUM_PIXELS_SHUFFLE if cfg.use_color_shuffle else MAX_ENUM_PIXELS_PLAIN
    if n < 1:
        raise ArgumentError("n must be at least 1")
    if n > limit:
        raise CapacityError(f"enumeration limited to n <= {limit}, got {n}")
    shuffle_choices = range(6) if cfg.use_color_shuffle else range(1)
    for shuffles in itertools.product(shuffle_choices, repeat=n):
        for bits in itertools.product((0, 1), repeat=3 * n):
            flips = np.array(bits, dtype=np.uint8).reshape(3, n)
            yield Keystream(flips, np.array(shuffles, dtype=np.uint8))
