import numpy as np
import pytest
from hypothesis import given, strategies as st

from pixcrypt.errors import ArgumentError, ContainerError, FormatError, LengthError, UnsupportedDepthError
from pixcrypt.image_io import (
    STL10_RECORD_BYTES,
    Image,
    center_crop,
    load_stl10,
    read_ppm,
    read_stl10,
    write_ppm,
)

from conftest import random_image


def test_read_two_pixels():
    img = read_ppm(b"P6\n2 1\n255\n" + bytes([10, 20, 30, 40, 50, 60]))
    assert (img.width, img.height) == (2, 1)
    assert img.data == bytes([10, 20, 30, 40, 50, 60])


def test_read_single_black_pixel():
    img = read_ppm(b"P6\n1 1\n255\n\x00\x00\x00")
    assert img == Image.from_samples(1, 1, [0, 0, 0])


def test_write_header_is_exact():
    img = Image.from_samples(2, 1, [1, 2, 3, 4, 5, 6])
    assert write_ppm(img) == b"P6\n2 1\n255\n\x01\x02\x03\x04\x05\x06"


def test_read_accepts_comments_and_extra_whitespace():
    img = read_ppm(b"P6 # made by hand\n 1\t1 \n255\n\x07\x08\x09")
    assert img.data == b"\x07\x08\x09"


def test_round_trip_random_images():
    rng = np.random.default_rng(0)
    for _ in range(100):
        img = random_image(rng, int(rng.integers(1, 40)), int(rng.integers(1, 40)))
        data = write_ppm(img)
        assert read_ppm(data) == img
        assert write_ppm(read_ppm(data)) == data


@given(st.binary(min_size=3, max_size=3 * 12), st.integers(1, 12))
def test_round_trip_property(payload, width):
    height = len(payload) // (3 * width)
    if height == 0:
        return
    payload = payload[: 3 * width * height]
    img = Image.from_samples(width, height, payload)
    assert read_ppm(write_ppm(img)) == img


@pytest.mark.parametrize(
    "data, error",
    [
        (b"P3\n1 1\n255\n0 0 0", FormatError),
        (b"P6\n1 x\n255\n\x00\x00\x00", FormatError),
        (b"P6\n1 1\n65535\n" + bytes(6), UnsupportedDepthError),
        (b"P6\n1 1\n15\n\x00\x00\x00", UnsupportedDepthError),
        (b"P6\n2 2\n255\n" + bytes(11), LengthError),
        (b"", FormatError),
    ],
)
def test_read_errors(data, error):
    with pytest.raises(error):
        read_ppm(data)


def test_image_invariants():
    with pytest.raises(ArgumentError):
        Image(np.zeros((0, 3, 3), np.uint8))
    with pytest.raises(ArgumentError):
        Image(np.zeros((2, 2), np.uint8))
    with pytest.raises(ArgumentError):
        Image(np.full((1, 1, 3), 256))
    with pytest.raises(LengthError):
        Image.from_samples(2, 2, bytes(5))


def test_stl10_zero_record():
    (img,) = read_stl10(bytes(STL10_RECORD_BYTES))
    assert (img.width, img.height) == (96, 96)
    assert img.data == bytes(STL10_RECORD_BYTES)


def test_stl10_counts_records():
    assert len(read_stl10(bytes(2 * STL10_RECORD_BYTES))) == 2


def test_stl10_bad_length():
    with pytest.raises(ContainerError):
        read_stl10(bytes(STL10_RECORD_BYTES + 1))


def test_stl10_layout_matches_index_arithmetic():
    # planar, column-major: offset = c*96*96 + col*96 + row
    record = (np.arange(STL10_RECORD_BYTES) * 7919 % 251).astype(np.uint8)
    (img,) = read_stl10(record.tobytes())
    flat = img.data
    for c in range(3):
        for col in range(0, 96, 7):
            for row in range(0, 96, 5):
                planar = c * 96 * 96 + col * 96 + row
                interleaved = 3 * (row * 96 + col) + c
                assert flat[interleaved] == record[planar]


def test_stl10_single_marked_byte():
    record = bytearray(STL10_RECORD_BYTES)
    record[1] = 200  # c=0, col=0, row=1
    (img,) = read_stl10(bytes(record))
    assert img.data[3 * (1 * 96 + 0) + 0] == 200
    assert sum(img.data) == 200


def test_load_stl10_reads_prefix(tmp_path):
    path = tmp_path / "train_X.bin"
    path.write_bytes(bytes(range(256)) * (3 * STL10_RECORD_BYTES // 256))
    assert len(load_stl10(path)) == 3
    assert len(load_stl10(path, count=2)) == 2


def test_stl10_official_record_is_stable(stl10_dir):
    from pathlib import Path

    path = Path(stl10_dir) / "train_X.bin"
    first = write_ppm(load_stl10(path, 1)[0])
    again = write_ppm(load_stl10(path, 2)[0])
    assert first == again
    assert first.startswith(b"P6\n96 96\n255\n") and len(first) == 13 + STL10_RECORD_BYTES


def test_center_crop_offsets():
    px = np.arange(5 * 4 * 3, dtype=np.uint8).reshape(4, 5, 3)
    img = Image(px)
    out = center_crop(img, 2)
    assert np.array_equal(out.pixels, px[1:3, 1:3])


def test_center_crop_full_square_is_identity(rng):
    img = random_image(rng, 9, 9)
    assert center_crop(img, 9) == img


@pytest.mark.parametrize("size", [0, 6])
def test_center_crop_bad_size(rng, size):
    with pytest.raises(ArgumentError):
        center_crop(random_image(rng, 5, 7), size)
