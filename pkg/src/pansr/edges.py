"""Gradient, edge and entropy primitives shared by the perceptual metrics.

All functions take a single 2D band in float64 and use edge replication at
the borders, consistent with the rest of the package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

# Scharr derivative kernels.  The 1/16 normalizes the cross-direction
# smoothing taps (3+10+3) to one, leaving the central-difference span: a
# ramp of slope b responds with 2b.  This is the convention the gradient
# similarity constant T2=160 is calibrated against.
_SCHARR_X = np.array([[-3.0, 0.0, 3.0], [-10.0, 0.0, 10.0], [-3.0, 0.0, 3.0]]) / 16.0
_SCHARR_Y = _SCHARR_X.T


@dataclass(frozen=True)
class CannyParams:
    """Smoothing width and hysteresis thresholds (fractions of the max gradient)."""

    sigma: float = 1.4
    low_frac: float = 0.1
    high_frac: float = 0.2

    def __post_init__(self) -> None:
        if not (0.0 < self.low_frac <= self.high_frac <= 1.0):
            raise ValueError("need 0 < low_frac <= high_frac <= 1")


def gaussian_smooth(band: np.ndarray, sigma: float) -> np.ndarray:
    return ndimage.gaussian_filter(np.asarray(band, dtype=np.float64), sigma, mode="nearest")


def scharr_gradients(band: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(d/dx, d/dy) by Scharr correlation; y grows downward."""
    band = np.asarray(band, dtype=np.float64)
    gx = ndimage.correlate(band, _SCHARR_X, mode="nearest")
    gy = ndimage.correlate(band, _SCHARR_Y, mode="nearest")
    return gx, gy


def scharr_magnitude(band: np.ndarray) -> np.ndarray:
    gx, gy = scharr_gradients(band)
    return np.hypot(gx, gy)


def _nms(mag: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Thin ridges to single-pixel width along the gradient direction.

    The gradient angle picks one of four directions; a pixel survives when its
    magnitude is >= the neighbour behind it and strictly > the neighbour ahead,
    so a plateau of equal maxima keeps exactly its last pixel.  Out-of-image
    neighbours compare as -1, letting ridges reach the border.
    """
    h, w = mag.shape
    ang = np.mod(np.arctan2(gy, gx), np.pi)
    sector = np.floor((ang + np.pi / 8.0) / (np.pi / 4.0)).astype(np.int64) % 4
    offsets = {0: (0, 1), 1: (1, 1), 2: (1, 0), 3: (1, -1)}

    padded = np.pad(mag, 1, mode="constant", constant_values=-1.0)

    def shifted(dy: int, dx: int) -> np.ndarray:
        return padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]

    keep = np.zeros(mag.shape, dtype=bool)
    for s, (dy, dx) in offsets.items():
        sel = sector == s
        keep |= sel & (mag >= shifted(-dy, -dx)) & (mag > shifted(dy, dx))
    return keep & (mag > 0)


def canny_edges(band: np.ndarray, params: CannyParams = CannyParams()) -> np.ndarray:
    """Boolean edge map: Gaussian smoothing, Scharr gradients, non-maximum
    suppression, then hysteresis linking with 8-connectivity.

    Thresholds are `low_frac`/`high_frac` times the maximum gradient magnitude
    of the smoothed band; a constant band has no edges.
    """
    band = np.asarray(band, dtype=np.float64)
    if band.max() == band.min():
        # Exactly constant input: correlate() on a constant leaves ~1e-13
        # cancellation residue, which peak-relative thresholds would then
        # amplify into phantom edges.
        return np.zeros(band.shape, dtype=bool)
    smoothed = gaussian_smooth(band, params.sigma)
    gx, gy = scharr_gradients(smoothed)
    mag = np.hypot(gx, gy)
    peak = float(mag.max())
    if peak == 0.0:
        return np.zeros(band.shape, dtype=bool)

    thin = _nms(mag, gx, gy)
    strong = thin & (mag >= params.high_frac * peak)
    weak = thin & (mag >= params.low_frac * peak)
    if not strong.any():
        return np.zeros(band.shape, dtype=bool)

    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=np.int8))
    keep = np.zeros(n + 1, dtype=bool)
    keep[np.unique(labels[strong])] = True
    keep[0] = False
    return keep[labels]


def shannon_entropy(band: np.ndarray, bins: int = 256, vrange: tuple[float, float] = (0.0, 255.0)) -> float:
    """Histogram entropy in bits; values are clipped into `vrange` first.

    With 256 bins the result lies in [0, 8].
    """
    clipped = np.clip(np.asarray(band, dtype=np.float64), vrange[0], vrange[1])
    hist, _ = np.histogram(clipped, bins=bins, range=vrange)
    p = hist / hist.sum()
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())
