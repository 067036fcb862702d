"""Whole-scene super-resolution by tiled network inference.

Scenes larger than one training tile are processed as a grid of overlapping
tiles; each output pixel is taken from the tile whose centre is nearest
(ownership boundaries at overlap midpoints), which avoids seams without any
blending arithmetic.  Tiles at the right/bottom are shifted inward so every
tile is full size.

Networks are fully convolutional, so tile results match the untiled result
wherever the network's receptive field fits inside the overlap margin; very
deep models (rednet30's receptive radius exceeds the default 16-pixel HR
margin) may differ slightly near ownership boundaries.
"""

from __future__ import annotations

import numpy as np

from ..raster import RasterImage, SAMPLE_MAX, upsample_bicubic
from .network import Network


def _tile_starts(size: int, tile: int, overlap: int) -> list[int]:
    """Start offsets stepping by (tile - overlap), last start clamped inward."""
    if tile > size:
        raise ValueError(f"tile {tile} exceeds image size {size}")
    step = tile - overlap
    starts = list(range(0, size - tile + 1, step))
    if starts[-1] != size - tile:
        starts.append(size - tile)
    return starts


def _ownership(starts: list[int], tile: int, size: int) -> list[tuple[int, int]]:
    """Half-open output intervals owned by each tile (midpoint split)."""
    bounds = [0]
    for prev, nxt in zip(starts, starts[1:]):
        bounds.append((nxt + prev + tile) // 2)
    bounds.append(size)
    return list(zip(bounds[:-1], bounds[1:]))


def super_resolve(
    net: Network,
    image: RasterImage,
    tile: int = 32,
    overlap: int = 8,
    clamp: bool = True,
) -> RasterImage:
    """Upscale a low-resolution 4-band image by the network's scale factor.

    `tile` and `overlap` are in low-resolution pixels.  Images no larger than
    one tile are processed whole.  Output values are clamped to the sample
    domain unless `clamp` is false.
    """
    if image.data.shape[0] != net.in_channels:
        raise ValueError(f"network expects {net.in_channels} bands, image has {image.data.shape[0]}")
    if overlap < 0 or overlap >= tile:
        raise ValueError(f"overlap must lie in [0, tile), got {overlap} for tile {tile}")
    scale = net.spec.scale
    pre_up = net.spec.input_convention == "pre_upsampled"
    bands, h, w = image.data.shape
    norm = image.data / SAMPLE_MAX

    def run(patch: np.ndarray) -> np.ndarray:
        """LR patch (bands, th, tw) -> HR patch (bands, th*scale, tw*scale)."""
        x = upsample_bicubic(patch, scale) if pre_up else patch
        out = net.forward(np.ascontiguousarray(x[None], dtype=net.dtype))
        return out[0].astype(np.float64)

    if h <= tile and w <= tile:
        out = run(norm)
    else:
        ys = _tile_starts(h, min(tile, h), overlap if tile <= h else 0)
        xs = _tile_starts(w, min(tile, w), overlap if tile <= w else 0)
        own_y = _ownership(ys, min(tile, h), h)
        own_x = _ownership(xs, min(tile, w), w)
        out = np.empty((bands, h * scale, w * scale), dtype=np.float64)
        for y0, (oy0, oy1) in zip(ys, own_y):
            for x0, (ox0, ox1) in zip(xs, own_x):
                hr = run(norm[:, y0 : y0 + min(tile, h), x0 : x0 + min(tile, w)])
                out[:, oy0 * scale : oy1 * scale, ox0 * scale : ox1 * scale] = hr[
                    :,
                    (oy0 - y0) * scale : (oy1 - y0) * scale,
                    (ox0 - x0) * scale : (ox1 - x0) * scale,
                ]

    out = out * SAMPLE_MAX
    if clamp:
        out = np.clip(out, 0.0, SAMPLE_MAX)
    pixel_size = None if image.pixel_size is None else image.pixel_size / scale
    return RasterImage(
        data=out,
        band_roles=image.band_roles,
        pixel_size=pixel_size,
        geo_tags=image.geo_tags,
    )
