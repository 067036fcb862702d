"""Multiband raster data model, TIFF I/O, resampling and smoothing.

Images are 12-bit analytic products stored as 16-bit unsigned TIFF; in
memory all processing happens in float64 and values are quantized only
when a file is written.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import tifffile

BAND_ROLES = ("R", "G", "B", "NIR", "PAN")
DEFAULT_MS_ORDER = ("R", "G", "B", "NIR")
SAMPLE_MAX = 4095.0

# TIFF tags carried through unchanged (GeoTIFF and GDAL metadata).
GEO_TAG_IDS = (33550, 33922, 34264, 34735, 34736, 34737, 42112, 42113)


@dataclass(frozen=True)
class RasterImage:
    """A width x height x bands grid of 12-bit-domain samples.

    ``data`` is float64 with shape (bands, height, width).  Samples are
    expected to live in ``sample_domain``; operations that can push values
    outside it (e.g. unclamped pansharpening) say so, and writing a file
    always re-enters the domain.
    """

    data: np.ndarray
    band_roles: tuple[str, ...]
    sample_domain: tuple[float, float] = (0.0, SAMPLE_MAX)
    pixel_size: float | None = None
    geo_tags: tuple = field(default=(), compare=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3:
            raise ValueError(f"expected (bands, height, width) data, got shape {data.shape}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "band_roles", tuple(self.band_roles))
        if len(self.band_roles) != data.shape[0]:
            raise ValueError(
                f"{len(self.band_roles)} band roles for {data.shape[0]} band planes"
            )
        for role in self.band_roles:
            if role not in BAND_ROLES:
                raise ValueError(f"unknown band role {role!r}")
        if "PAN" in self.band_roles and data.shape[0] != 1:
            raise ValueError("a PAN image must have exactly one band")

    @property
    def bands(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def is_pan(self) -> bool:
        return self.band_roles == ("PAN",)

    def in_domain(self) -> bool:
        lo, hi = self.sample_domain
        return bool(np.all(self.data >= lo) and np.all(self.data <= hi))

    def band(self, i: int) -> np.ndarray:
        return self.data[i]

    def with_data(self, data: np.ndarray, pixel_size: float | None = None) -> "RasterImage":
        return replace(self, data=data, pixel_size=pixel_size or self.pixel_size)


@dataclass(frozen=True)
class ResampleSpec:
    """Scale ratio and interpolation method for up/down resampling."""

    factor: int
    method: str = "bicubic"  # bicubic | nearest | average
    bicubic_a: float = -0.5  # Catmull-Rom / Keys coefficient

    def __post_init__(self):
        if self.factor < 1:
            raise ValueError(f"factor must be >= 1, got {self.factor}")
        if self.method not in ("bicubic", "nearest", "average"):
            raise ValueError(f"unknown resampling method {self.method!r}")
        if self.bicubic_a >= 0:
            raise ValueError(f"bicubic_a must be negative, got {self.bicubic_a}")


def default_roles(nbands: int) -> tuple[str, ...]:
    if nbands == 1:
        return ("PAN",)
    if nbands == 4:
        return DEFAULT_MS_ORDER
    raise ValueError(f"band count must be 1 or 4, got {nbands}")


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------


def _sidecar_path(path: Path) -> Path:
    return Path(str(path) + ".json")


def read_raster(path) -> RasterImage:
    """Read a baseline uncompressed TIFF into a RasterImage.

    Band roles come from the ``<path>.json`` sidecar when present,
    otherwise defaults apply (4 bands -> R,G,B,NIR; 1 band -> PAN).
    Samples above 4095 are rejected as analytic-product violations.
    """
    path = Path(path)
    try:
        with tifffile.TiffFile(path) as tf:
            page = tf.pages[0]
            if page.compression != tifffile.COMPRESSION.NONE:
                raise ValueError(f"{path}: only uncompressed TIFF is supported")
            if page.dtype != np.uint16:
                raise ValueError(f"{path}: expected 16-bit unsigned samples, got {page.dtype}")
            arr = page.asarray()
            geo_tags = tuple(
                (tag.code, tag.dtype.value, tag.count, tag.value)
                for code in GEO_TAG_IDS
                if (tag := page.tags.get(code)) is not None
            )
    except (tifffile.TiffFileError, FileNotFoundError, IsADirectoryError) as exc:
        raise ValueError(f"unreadable raster file {path}: {exc}") from exc

    if arr.ndim == 2:
        arr = arr[None, :, :]
    elif arr.ndim == 3:
        arr = np.moveaxis(arr, -1, 0)  # (h, w, s) -> (s, h, w)
    if arr.shape[0] not in (1, 4):
        raise ValueError(f"{path}: band count must be 1 or 4, got {arr.shape[0]}")
    if arr.max(initial=0) > SAMPLE_MAX:
        raise ValueError(
            f"{path}: sample out of 12-bit domain (max {int(arr.max())} > 4095)"
        )

    roles = default_roles(arr.shape[0])
    pixel_size = None
    sidecar = _sidecar_path(path)
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
        if "band_order" in meta:
            roles = tuple(meta["band_order"])
        if meta.get("pixel_size_m") is not None:
            pixel_size = float(meta["pixel_size_m"])

    return RasterImage(
        data=arr.astype(np.float64),
        band_roles=roles,
        pixel_size=pixel_size,
        geo_tags=geo_tags,
    )


def quantize(data: np.ndarray, domain: tuple[float, float] = (0.0, SAMPLE_MAX)) -> np.ndarray:
    """Round half away from zero, clamp to the sample domain, cast to uint16."""
    rounded = np.copysign(np.floor(np.abs(data) + 0.5), data)
    return np.clip(rounded, domain[0], domain[1]).astype(np.uint16)


def write_raster(img: RasterImage, path) -> None:
    """Write as baseline uncompressed striped TIFF plus a JSON sidecar.

    Reading the file back reproduces integer-valued images bit-exactly.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = quantize(img.data, img.sample_domain)
    if arr.shape[0] == 1:
        payload = arr[0]
    else:
        payload = np.moveaxis(arr, 0, -1)  # contiguous planar configuration
    extratags = [
        (code, dtype, count, value, True) for code, dtype, count, value in img.geo_tags
    ]
    try:
        tifffile.imwrite(
            path,
            payload,
            photometric="minisblack",
            planarconfig="contig" if arr.shape[0] > 1 else None,
            compression=None,
            extratags=extratags,
        )
    except OSError as exc:
        raise OSError(f"cannot write raster file {path}: {exc}") from exc

    meta = {"band_order": list(img.band_roles)}
    if img.pixel_size is not None:
        meta["pixel_size_m"] = img.pixel_size
    _sidecar_path(path).write_text(json.dumps(meta) + "\n")


# ---------------------------------------------------------------------------
# Resampling
# ---------------------------------------------------------------------------


def _cubic_weights(t: np.ndarray, a: float) -> np.ndarray:
    """Keys cubic convolution kernel evaluated at |t| < 2."""
    at = np.abs(t)
    w = np.where(
        at <= 1.0,
        (a + 2.0) * at**3 - (a + 3.0) * at**2 + 1.0,
        a * (at**3 - 5.0 * at**2 + 8.0 * at - 4.0),
    )
    return np.where(at < 2.0, w, 0.0)


def _resample_axis_cubic(arr: np.ndarray, axis: int, out_size: int, a: float) -> np.ndarray:
    """Separable cubic resampling of one axis with pixel-center alignment.

    Output center i maps to input coordinate (i + 0.5) * in/out - 0.5;
    out-of-range taps replicate the border sample.
    """
    in_size = arr.shape[axis]
    scale = in_size / out_size
    x = (np.arange(out_size) + 0.5) * scale - 0.5
    base = np.floor(x).astype(np.int64)
    t = x - base
    out = np.zeros(arr.shape[:axis] + (out_size,) + arr.shape[axis + 1 :], dtype=np.float64)
    shape = [1] * arr.ndim
    shape[axis] = out_size
    for k in (-1, 0, 1, 2):
        idx = np.clip(base + k, 0, in_size - 1)
        w = _cubic_weights(t - k, a).reshape(shape)
        out += w * np.take(arr, idx, axis=axis)
    return out


def _resample_axis_nearest(arr: np.ndarray, axis: int, out_size: int) -> np.ndarray:
    in_size = arr.shape[axis]
    scale = in_size / out_size
    # nearest input center to (i + 0.5) * scale - 0.5; half-ties round up
    idx = np.clip(np.floor((np.arange(out_size) + 0.5) * scale).astype(np.int64), 0, in_size - 1)
    return np.take(arr, idx, axis=axis)


def _block_mean(arr: np.ndarray, factor: int) -> np.ndarray:
    b, h, w = arr.shape
    return arr.reshape(b, h // factor, factor, w // factor, factor).mean(axis=(2, 4))


def resample(img: RasterImage, spec: ResampleSpec, direction: str) -> RasterImage:
    """Resample by an integer factor, up or down.

    Down requires dimensions divisible by the factor.  ``average`` is
    down-only (arithmetic mean of each factor x factor block).
    """
    if direction not in ("up", "down"):
        raise ValueError(f"direction must be 'up' or 'down', got {direction!r}")
    f = spec.factor
    if f == 1:
        return img
    data = img.data
    if direction == "down":
        if img.height % f or img.width % f:
            raise ValueError(
                f"dimensions {img.width}x{img.height} not divisible by factor {f}"
            )
        out_h, out_w = img.height // f, img.width // f
    else:
        out_h, out_w = img.height * f, img.width * f

    if spec.method == "average":
        if direction != "down":
            raise ValueError("average resampling is defined for downsampling only")
        out = _block_mean(data, f)
    elif spec.method == "nearest":
        out = _resample_axis_nearest(_resample_axis_nearest(data, 1, out_h), 2, out_w)
    else:
        out = _resample_axis_cubic(_resample_axis_cubic(data, 1, out_h, spec.bicubic_a), 2, out_w, spec.bicubic_a)

    pixel_size = None
    if img.pixel_size is not None:
        pixel_size = img.pixel_size * f if direction == "down" else img.pixel_size / f
    return RasterImage(out, img.band_roles, img.sample_domain, pixel_size, img.geo_tags)


def upsample_bicubic(data: np.ndarray, factor: int, a: float = -0.5) -> np.ndarray:
    """Bicubic x-factor upsampling of a (bands, h, w) or (h, w) array."""
    squeeze = data.ndim == 2
    arr = data[None] if squeeze else data
    out = _resample_axis_cubic(arr, 1, arr.shape[1] * factor, a)
    out = _resample_axis_cubic(out, 2, arr.shape[2] * factor, a)
    return out[0] if squeeze else out


# ---------------------------------------------------------------------------
# Smoothing
# ---------------------------------------------------------------------------


def box_filter(band: np.ndarray, k: int) -> np.ndarray:
    """k x k moving average with edge replication, kept in float64.

    Uses prefix sums along each axis; k must be odd.
    """
    if k % 2 == 0 or k < 1:
        raise ValueError(f"window size must be odd and >= 1, got {k}")
    if k == 1:
        return np.asarray(band, dtype=np.float64).copy()
    band = np.asarray(band, dtype=np.float64)
    p = k // 2
    padded = np.pad(band, p, mode="edge")

    def _axis_sum(a, axis):
        zeros_shape = list(a.shape)
        zeros_shape[axis] = 1
        c = np.concatenate([np.zeros(zeros_shape), np.cumsum(a, axis=axis, dtype=np.float64)], axis=axis)
        hi_idx = np.arange(k, a.shape[axis] + 1)
        return np.take(c, hi_idx, axis=axis) - np.take(c, hi_idx - k, axis=axis)

    summed = _axis_sum(_axis_sum(padded, 0), 1)
    return summed / float(k * k)


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------


def normalize(img: RasterImage) -> np.ndarray:
    """Map samples to [0, 1] by dividing by the domain maximum."""
    lo, hi = img.sample_domain
    if not img.in_domain():
        raise ValueError("samples outside the sample domain; cannot normalize")
    return img.data / hi


def denormalize(tensor: np.ndarray, like: RasterImage) -> RasterImage:
    """Map a [0, 1] tensor back to the 12-bit domain, clamping overshoot.

    Quantization to integers happens only when the image is written.
    """
    lo, hi = like.sample_domain
    data = np.clip(np.asarray(tensor, dtype=np.float64) * hi, lo, hi)
    return RasterImage(data, like.band_roles, like.sample_domain, like.pixel_size, like.geo_tags)
