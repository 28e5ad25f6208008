"""
Synthetic thermal/optical pair generation for demos, benchmarks and tests.

Real thermal and optical images are spatially smooth, which is what makes
the registration search's early stop sound: mutual information rises
gradually as the candidate window approaches alignment. White noise has no
such gradient, so synthetic pairs are built from smooth random fields (a
mixture of a coarse component spanning the image and finer texture), with
the thermal image taken as an intensity-inverted copy of the aligned
optical region to mimic the modality gap.
"""

from __future__ import annotations

import numpy as np

from .image import GrayImage, RgbImage


def smooth_field(rng, height: int, width: int, components: int = 14) -> np.ndarray:
    """Random smooth 8-bit field: coarse gradient plus cosine texture."""
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    span = max(height, width)
    # coarse component: about one cycle across the image, random orientation
    theta = rng.uniform(0, 2 * np.pi)
    field = 2.0 * np.cos(
        2 * np.pi * (np.cos(theta) * xs + np.sin(theta) * ys) / (1.5 * span)
        + rng.uniform(0, 2 * np.pi)
    )
    for _ in range(components):
        freq = rng.uniform(0.02, 0.12)
        theta = rng.uniform(0, 2 * np.pi)
        amp = rng.uniform(0.3, 1.0)
        phase = rng.uniform(0, 2 * np.pi)
        field += amp * np.cos(
            2 * np.pi * freq * (np.cos(theta) * xs + np.sin(theta) * ys) + phase
        )
    field -= field.min()
    peak = field.max()
    if peak > 0:
        field *= 255.0 / peak
    return np.floor(field + 0.5).astype(np.uint8)


def make_gray_pair(rng, thermal_hw, optical_hw, offset):
    """Smooth optical image with an inverted thermal copy planted at offset.

    Returns (thermal GrayImage, optical GrayImage); the thermal equals
    255 - optical over the planted region, a bijective remap, so the MI
    peak sits exactly at the planted offset.
    """
    a, b = thermal_hw
    r, c = offset
    x, y = optical_hw
    if not (0 <= r <= x - a and 0 <= c <= y - b):
        raise ValueError(f"offset {offset} does not fit {thermal_hw} in {optical_hw}")
    optical = smooth_field(rng, x, y)
    thermal = 255 - optical[r : r + a, c : c + b]
    return GrayImage(thermal), GrayImage(optical)


def make_rgb_pair(rng, thermal_hw, optical_hw, offset):
    """Like make_gray_pair but with an achromatic RGB optical image."""
    thermal, optical = make_gray_pair(rng, thermal_hw, optical_hw, offset)
    rgb = np.repeat(optical.pixels[:, :, None], 3, axis=2)
    return thermal, RgbImage(rgb)
