"""8-bit RGB images: binary PPM (P6) files and the STL-10 binary container."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Sequence, Union

import numpy as np

from pixcrypt.errors import ArgumentError, ContainerError, FormatError, LengthError, UnsupportedDepthError

STL10_SIZE = 96
STL10_RECORD_BYTES = 3 * STL10_SIZE * STL10_SIZE  # 27648

_PPM_HEADER = re.compile(rb"P6(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)\s")


@dataclass(frozen=True, eq=False)
class Image:
    """An RGB raster held as a ``(height, width, 3)`` uint8 array.

    The array is C-contiguous, so its flat view is the row-major,
    interleaved R,G,B sample sequence.
    """

    pixels: np.ndarray

    def __post_init__(self):
        px = self.pixels
        if not isinstance(px, np.ndarray):
            raise ArgumentError("pixels must be a numpy array")
        if px.ndim != 3 or px.shape[2] != 3:
            raise ArgumentError(f"expected shape (height, width, 3), got {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ArgumentError("image must be at least 1x1")
        if px.dtype != np.uint8:
            if not np.issubdtype(px.dtype, np.integer) or px.min() < 0 or px.max() > 255:
                raise ArgumentError("samples must be integers in [0, 255]")
            px = px.astype(np.uint8)
        px = np.ascontiguousarray(px)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_samples(cls, width: int, height: int, data: Union[bytes, Sequence[int]]) -> "Image":
        arr = np.frombuffer(bytes(data), dtype=np.uint8) if not isinstance(data, np.ndarray) else data
        if arr.size != 3 * width * height:
            raise LengthError(f"expected {3 * width * height} samples, got {arr.size}")
        return cls(np.asarray(arr, dtype=np.uint8).reshape(height, width, 3))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def pixel_count(self) -> int:
        return self.width * self.height

    @property
    def data(self) -> bytes:
        return self.pixels.tobytes()

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(np.array_equal(self.pixels, other.pixels))

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))

    def __repr__(self):
        return f"Image({self.width}x{self.height})"


def read_ppm(data: bytes) -> Image:
    if not data.startswith(b"P6"):
        raise FormatError("not a binary P6 pixmap")
    m = _PPM_HEADER.match(data)
    if m is None:
        raise FormatError("malformed P6 header")
    width, height, maxval = (int(g) for g in m.groups())
    if width < 1 or height < 1:
        raise FormatError(f"invalid dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedDepthError(f"maxval {maxval} is not supported, only 255")
    start = m.end()
    need = 3 * width * height
    payload = data[start:start + need]
    if len(payload) < need:
        raise LengthError(f"truncated payload: expected {need} bytes, got {len(payload)}")
    return Image.from_samples(width, height, payload)


def write_ppm(img: Image) -> bytes:
    return b"P6\n%d %d\n255\n" % (img.width, img.height) + img.data


def load_ppm(path: Union[str, Path]) -> Image:
    return read_ppm(Path(path).read_bytes())


def save_ppm(img: Image, path: Union[str, Path]) -> None:
    Path(path).write_bytes(write_ppm(img))


def read_stl10(data: bytes) -> List[Image]:
    """Decode STL-10 ``*_X.bin`` records.

    Each record is channel-planar, and each plane is stored column-major.
    """
    if len(data) % STL10_RECORD_BYTES != 0:
        raise ContainerError(
            f"STL-10 payload length {len(data)} is not a multiple of {STL10_RECORD_BYTES}"
        )
    raw = np.frombuffer(data, dtype=np.uint8).reshape(-1, 3, STL10_SIZE, STL10_SIZE)
    # axes are (record, channel, col, row) -> (record, row, col, channel)
    arr = raw.transpose(0, 3, 2, 1)
    return [Image(np.ascontiguousarray(a)) for a in arr]


def load_stl10(path: Union[str, Path], count: int | None = None) -> List[Image]:
    with open(path, "rb") as fh:
        data = fh.read() if count is None else fh.read(count * STL10_RECORD_BYTES)
    return read_stl10(data)


def center_crop(img: Image, size: int) -> Image:
    if size < 1 or size > min(img.width, img.height):
        raise ArgumentError(f"crop size {size} outside [1, {min(img.width, img.height)}]")
    top = (img.height - size) // 2
    left = (img.width - size) // 2
    return Image(img.pixels[top:top + size, left:left + size])


def stack(images: Iterable[Image]) -> np.ndarray:
    """Stack same-sized images into a ``(count, height, width, 3)`` uint8 array."""
    images = list(images)
    if not images:
        raise ArgumentError("no images to stack")
    shape = images[0].pixels.shape
    for img in images:
        if img.pixels.shape != shape:
            raise ArgumentError(f"image sizes differ: {img.pixels.shape} vs {shape}")
    return np.stack([img.pixels for img in images])
