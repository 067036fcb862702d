"""Shared fixtures: seeded random imagery in the 12-bit domain."""

from __future__ import annotations

import numpy as np
import pytest

from pansr.raster import RasterImage, SAMPLE_MAX


def random_image(
    seed: int,
    bands: int = 4,
    size: int = 64,
    lo: float = 0.0,
    hi: float = SAMPLE_MAX,
    integral: bool = True,
) -> RasterImage:
    """Uniform random 12-bit image; integral by default so file I/O is exact."""
    rng = np.random.default_rng(seed)
    data = rng.uniform(lo, hi, size=(bands, size, size))
    if integral:
        data = np.rint(data)
    roles = ("PAN",) if bands == 1 else ("R", "G", "B", "NIR")
    return RasterImage(data, roles)


def textured_image(seed: int, bands: int = 4, size: int = 64) -> RasterImage:
    """Smooth oriented texture plus noise; has real edges for the perceptual
    metrics, unlike white noise."""
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    planes = []
    for _ in range(bands):
        theta = rng.uniform(0, np.pi)
        freq = rng.uniform(2.0, 10.0)
        wave = np.sin(2 * np.pi * freq * (np.cos(theta) * xx + np.sin(theta) * yy) / size)
        plane = 2048 + 1500 * wave + rng.normal(0, 60, size=(size, size))
        planes.append(plane)
    data = np.rint(np.clip(np.stack(planes), 0, SAMPLE_MAX))
    roles = ("PAN",) if bands == 1 else ("R", "G", "B", "NIR")
    return RasterImage(data, roles)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
