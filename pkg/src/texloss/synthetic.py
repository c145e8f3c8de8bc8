"""Seeded synthetic test images."""
from __future__ import annotations

import numpy as np

from .core import Image, Interval


def rng_for(seed: int) -> np.random.Generator:
    """Counter-based generator; every random draw in the package goes through here."""
    return np.random.Generator(np.random.Philox(seed))


def checkerboard(size: int = 64, square: int = 8, low: float = 0.2, high: float = 0.8,
                 value_range=Interval(0.0, 1.0)) -> Image:
    idx = np.arange(size) // square
    board = (idx[:, None] + idx[None, :]) % 2
    return Image(np.where(board == 1, high, low), value_range)


def smooth_gradient(size: int = 32, value_range=Interval(0.0, 1.0)) -> Image:
    """Diagonal ramp spanning the value range."""
    r = np.linspace(0.0, 1.0, size)
    ramp = 0.5 * (r[:, None] + r[None, :])
    return Image(value_range.lo + ramp * value_range.width, value_range)


def add_gaussian_noise(img: Image, std: float, seed: int) -> Image:
    """Additive i.i.d. Gaussian noise, clipped back into the value range."""
    noise = rng_for(seed).normal(0.0, std, img.shape)
    vr = img.value_range
    return img.with_data(np.clip(img.data + noise, vr.lo, vr.hi))


def random_image(size: int, seed: int, value_range=Interval(-1.0, 1.0)) -> Image:
    rng = rng_for(seed)
    return Image(rng.uniform(value_range.lo, value_range.hi, (size, size)), value_range)
