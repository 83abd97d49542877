import os

import numpy as np
import pytest
from hypothesis import settings

from pixcrypt.image_io import Image
from pixcrypt.keygen import Keystream

settings.register_profile("default", max_examples=100, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def record_criterion(number, name, ok, detail=""):
    """Log one acceptance line; shown in the terminal summary whatever the capture mode."""
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {name}" + (f" -- {detail}" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_image(rng, width, height):
    return Image(rng.integers(0, 256, (height, width, 3), dtype=np.uint8))


def random_keystream(rng, n):
    return Keystream(rng.integers(0, 2, (3, n), dtype=np.uint8), rng.integers(0, 6, n, dtype=np.uint8))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def stl10_dir():
    path = os.environ.get("PIXCRYPT_STL10_DIR")
    if not path:
        pytest.skip("set PIXCRYPT_STL10_DIR to a directory holding train_X.bin / test_X.bin")
    return path
