"""Pixel-based perceptual image cipher and a learned reconstruction attack on it."""

from pixcrypt.errors import PixcryptError
from pixcrypt.image_io import Image

__version__ = "0.1.0"

__all__ = ["Image", "PixcryptError", "__version__"]
