"""Seeded procedural RGB images for hermetic experiments.

Images are 1/f-amplitude noise fields (the spectral falloff of natural
photographs), mixed across channels so R, G and B are correlated, with a few
hard-edged ellipses and mild sensor-like noise on top. Smooth synthetic
images make poor SSIM fixtures: a flat gray guess already scores well on
them, so the texture here is deliberate.
"""

from __future__ import annotations

from typing import List

import numpy as np

from pixcrypt.image_io import Image


def _pink_field(rng: np.random.Generator, size: int, alpha: float) -> np.ndarray:
    fy = np.fft.fftfreq(size)[:, None]
    fx = np.fft.rfftfreq(size)[None, :]
    f = np.hypot(fx, fy)
    f[0, 0] = 1.0
    amp = f ** -alpha
    amp[0, 0] = 0.0
    spectrum = (rng.normal(size=f.shape) + 1j * rng.normal(size=f.shape)) * amp
    field = np.fft.irfft2(spectrum, s=(size, size))
    return field / field.std()


def synthetic_image(rng: np.random.Generator, size: int = 96, alpha: float = 1.0) -> Image:
    fields = np.stack([_pink_field(rng, size, alpha) for _ in range(3)], axis=-1)
    mix = 0.5 * np.eye(3) + rng.uniform(0.1, 0.4) * np.ones((3, 3))
    img = fields @ mix.T
    img = img / img.std() * 45.0 * rng.uniform(0.6, 1.2) + rng.uniform(60, 195, 3)

    yy, xx = np.mgrid[0:size, 0:size] / size
    for _ in range(rng.integers(1, 4)):
        cx, cy = rng.uniform(0, 1, 2)
        rx, ry = rng.uniform(0.1, 0.3, 2)
        inside = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0
        img[inside] += rng.uniform(-80, 80, 3)

    img += rng.normal(0, 4, img.shape)
    return Image(np.clip(np.rint(img), 0, 255).astype(np.uint8))


def synthetic_images(count: int, size: int = 96, seed: int = 0) -> List[Image]:
    rng = np.random.default_rng(seed)
    return [synthetic_image(rng, size) for _ in range(count)]
