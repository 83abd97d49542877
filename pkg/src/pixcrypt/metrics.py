"""Image quality measures: SSIM (Gaussian 11x11 window), MSE and PSNR."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from pixcrypt.errors import ArgumentError
from pixcrypt.image_io import Image


def gaussian_kernel_1d(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


@dataclass(frozen=True)
class SsimParams:
    window_size: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 255.0
    kernel: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kernel", gaussian_kernel_1d(self.window_size, self.sigma))

    @property
    def window(self) -> np.ndarray:
        return np.outer(self.kernel, self.kernel)

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.dynamic_range) ** 2


DEFAULT_SSIM = SsimParams()


def _filter_valid(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Separable correlation over the leading two axes, valid positions only."""
    k = kernel.shape[0]
    rows = np.lib.stride_tricks.sliding_window_view(x, k, axis=0)
    x = np.tensordot(rows, kernel, axes=([-1], [0]))
    cols = np.lib.stride_tricks.sliding_window_view(x, k, axis=1)
    return np.tensordot(cols, kernel, axes=([-1], [0]))


def ssim_map(a: np.ndarray, b: np.ndarray, p: SsimParams = DEFAULT_SSIM) -> np.ndarray:
    """Local SSIM at every fully-interior window position, per channel.

    ``a`` and ``b`` are ``(height, width, channels)`` arrays on the
    ``p.dynamic_range`` scale.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    kern = p.kernel
    mu_a = _filter_valid(a, kern)
    mu_b = _filter_valid(b, kern)
    var_a = _filter_valid(a * a, kern) - mu_a * mu_a
    var_b = _filter_valid(b * b, kern) - mu_b * mu_b
    cov = _filter_valid(a * b, kern) - mu_a * mu_b
    c1, c2 = p.c1, p.c2
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return num / den


def _check_pair(a: Image, b: Image) -> None:
    if a.pixels.shape != b.pixels.shape:
        raise ArgumentError(f"image sizes differ: {a.width}x{a.height} vs {b.width}x{b.height}")


def ssim(a: Image, b: Image, p: SsimParams = DEFAULT_SSIM) -> float:
    _check_pair(a, b)
    if min(a.width, a.height) < p.window_size:
        raise ArgumentError(f"SSIM needs images of at least {p.window_size}x{p.window_size}")
    per_channel = ssim_map(a.pixels, b.pixels, p).mean(axis=(0, 1))
    return float(per_channel.mean())


def mse_image(a: Image, b: Image) -> float:
    _check_pair(a, b)
    d = a.pixels.astype(np.float64) - b.pixels.astype(np.float64)
    return float(np.mean(d * d))


def psnr(a: Image, b: Image) -> float:
    err = mse_image(a, b)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / err)
