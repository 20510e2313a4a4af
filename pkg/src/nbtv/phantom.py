"""Synthetic piecewise-constant test images.

The generators are deterministic functions of (id, size, intensity scale)
so experiment runs are reproducible without bundling image data.  Values
lie in ``[0, intensity_scale]`` and every phantom has at least four
distinct plateau levels at any size >= 16.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, DomainError

PHANTOM_IDS = ("nested", "blocks")


def make_phantom(phantom_id: str, size: int, intensity_scale: float) -> np.ndarray:
    """Deterministic piecewise-constant square phantom.

    ``nested`` -- rectangles and ellipses at five plateau levels over a dim
    background.  ``blocks`` -- axis-aligned rectangles only, four levels.
    """
    if size < 16:
        raise DomainError(f"phantom size must be >= 16, got {size}")
    if intensity_scale < 0:
        raise DomainError(f"intensity_scale must be >= 0, got {intensity_scale}")
    if phantom_id == "nested":
        canvas = _nested(size)
    elif phantom_id == "blocks":
        canvas = _blocks(size)
    else:
        raise ConfigError(
            f"unknown phantom id {phantom_id!r}; known ids: {', '.join(PHANTOM_IDS)}"
        )
    return canvas * float(intensity_scale)


def _grid(size: int):
    # Pixel-center coordinates normalized to [0, 1].
    c = (np.arange(size) + 0.5) / size
    return np.meshgrid(c, c, indexing="ij")


def _nested(size: int) -> np.ndarray:
    rr, cc = _grid(size)
    img = np.full((size, size), 0.10)
    # Large ellipse.
    img[((rr - 0.52) / 0.38) ** 2 + ((cc - 0.5) / 0.33) ** 2 <= 1.0] = 0.45
    # Inner tilted-looking ellipse (axis-aligned, offset).
    img[((rr - 0.60) / 0.16) ** 2 + ((cc - 0.42) / 0.12) ** 2 <= 1.0] = 0.80
    # Bright rectangle.
    img[(np.abs(rr - 0.38) <= 0.10) & (np.abs(cc - 0.64) <= 0.08)] = 1.00
    # Dim rectangle in the background.
    img[(np.abs(rr - 0.15) <= 0.07) & (np.abs(cc - 0.20) <= 0.11)] = 0.25
    return img


def _blocks(size: int) -> np.ndarray:
    rr, cc = _grid(size)
    img = np.full((size, size), 0.15)
    img[(np.abs(rr - 0.35) <= 0.22) & (np.abs(cc - 0.35) <= 0.22)] = 0.50
    img[(np.abs(rr - 0.30) <= 0.10) & (np.abs(cc - 0.30) <= 0.10)] = 1.00
    img[(np.abs(rr - 0.72) <= 0.14) & (np.abs(cc - 0.68) <= 0.20)] = 0.75
    return img
