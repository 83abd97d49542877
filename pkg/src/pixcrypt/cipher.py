"""Pixel-based encryption: per-channel negative-positive flips, then optional color shuffling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pixcrypt.errors import ArgumentError
from pixcrypt.image_io import Image
from pixcrypt.keygen import Keystream

# Row k lists, for output channels (R, G, B), the input channel each one is taken from.
COLOR_PERMUTATIONS = np.array(
    [
        [0, 1, 2],  # R G B
        [0, 2, 1],  # R B G
        [1, 0, 2],  # G R B
        [1, 2, 0],  # G B R
        [2, 0, 1],  # B R G
        [2, 1, 0],  # B G R
    ],
    dtype=np.intp,
)
INVERSE_PERMUTATIONS = np.argsort(COLOR_PERMUTATIONS, axis=1)
# row index of each permutation's inverse: only 3 and 4 are not involutions
INVERSE_ROW = np.array([0, 1, 2, 4, 3, 5], dtype=np.uint8)


@dataclass(frozen=True)
class EncryptionConfig:
    use_color_shuffle: bool = False
    bit_depth: int = 8

    def __post_init__(self):
        if self.bit_depth != 8:
            raise ArgumentError(f"only 8-bit samples are supported, got L={self.bit_depth}")

    @property
    def steps(self) -> str:
        return "2+3" if self.use_color_shuffle else "2"


def _check(img: Image, ks: Keystream) -> None:
    if ks.n != img.pixel_count:
        raise ArgumentError(f"keystream covers {ks.n} pixels, image has {img.pixel_count}")


def negpos_transform(img: Image, ks: Keystream) -> Image:
    _check(img, ks)
    flat = img.pixels.reshape(-1, 3)
    mask = ks.flips.T * np.uint8(0xFF)
    return Image((flat ^ mask).reshape(img.pixels.shape))


def _permute(img: Image, table: np.ndarray, ks: Keystream) -> Image:
    _check(img, ks)
    flat = img.pixels.reshape(-1, 3)
    out = np.take_along_axis(flat, table[ks.shuffles], axis=1)
    return Image(out.reshape(img.pixels.shape))


def shuffle_colors(img: Image, ks: Keystream) -> Image:
    return _permute(img, COLOR_PERMUTATIONS, ks)


def unshuffle_colors(img: Image, ks: Keystream) -> Image:
    return _permute(img, INVERSE_PERMUTATIONS, ks)


def encrypt(img: Image, ks: Keystream, cfg: EncryptionConfig) -> Image:
    out = negpos_transform(img, ks)
    if cfg.use_color_shuffle:
        out = shuffle_colors(out, ks)
    return out


def decrypt(img: Image, ks: Keystream, cfg: EncryptionConfig) -> Image:
    # strict reverse of encrypt: flips and shuffles do not commute per pixel
    if cfg.use_color_shuffle:
        img = unshuffle_colors(img, ks)
    return negpos_transform(img, ks)
