"""SFIM pansharpening: fuse LR multispectral bands with the HR pan band.

Each band is bicubically upsampled and modulated by the ratio of the pan
band to its own smoothed version.  The modulation factor is identical for
all bands, so local band ratios (spectral properties) are preserved.
"""

from __future__ import annotations

from dataclasses import dataclass

from .raster import RasterImage, box_filter, read_raster, upsample_bicubic, write_raster


@dataclass(frozen=True)
class SfimParams:
    """Resolution ratio, smoothing window and stabilizer for SFIM.

    ``epsilon`` is added to the smoothed pan denominator in raw 12-bit
    units; it only matters where the smoothed pan approaches zero
    (ocean/shadow pixels) and keeps the fusion total.
    """

    ratio: int = 4
    kernel_size: int = 7
    epsilon: float = 1e-6
    clamp_output: bool = True

    def __post_init__(self):
        if self.ratio < 1:
            raise ValueError(f"ratio must be >= 1, got {self.ratio}")
        if self.kernel_size % 2 == 0 or self.kernel_size < self.ratio:
            raise ValueError(
                f"kernel_size must be odd and >= ratio, got {self.kernel_size} (ratio {self.ratio})"
            )
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


def sfim(ms: RasterImage, pan: RasterImage, p: SfimParams = SfimParams()) -> RasterImage:
    """Pansharpen a 4-band LR image with an HR pan band.

    For every band: HR_b = bicubic_up(ms_b) * pan / (box(pan) + eps),
    computed in float64.  Output band order and roles equal ``ms``.
    """
    if pan.bands != 1:
        raise ValueError(f"pan image must have a single band, got {pan.bands}")
    if ms.bands != 4:
        raise ValueError(f"multispectral image must have four bands, got {ms.bands}")
    if pan.height != ms.height * p.ratio or pan.width != ms.width * p.ratio:
        raise ValueError(
            f"pan dimensions {pan.width}x{pan.height} are not "
            f"{p.ratio}x the multispectral {ms.width}x{ms.height}"
        )

    pan_plane = pan.band(0)
    modulation = pan_plane / (box_filter(pan_plane, p.kernel_size) + p.epsilon)
    out = upsample_bicubic(ms.data, p.ratio) * modulation[None, :, :]
    if p.clamp_output:
        out = out.clip(ms.sample_domain[0], ms.sample_domain[1])
    return RasterImage(out, ms.band_roles, ms.sample_domain, pan.pixel_size, pan.geo_tags)


def pansharpen_scene(ms_path, pan_path, out_path, p: SfimParams = SfimParams()) -> RasterImage:
    """File-level SFIM wrapper with manifest propagation.

    When both inputs carry pixel_size metadata, their ratio must agree
    with the dimension ratio.
    """
    ms = read_raster(ms_path)
    pan = read_raster(pan_path)
    if ms.pixel_size is not None and pan.pixel_size is not None:
        meta_ratio = ms.pixel_size / pan.pixel_size
        if abs(meta_ratio - p.ratio) > 1e-9:
            raise ValueError(
                f"pixel_size metadata implies ratio {meta_ratio:g}, "
                f"but pansharpening ratio is {p.ratio}"
            )
    fused = sfim(ms, pan, p)
    write_raster(fused, out_path)
    return fused
