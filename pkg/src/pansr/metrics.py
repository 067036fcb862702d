"""Full-reference quality metrics for 12-bit multiband imagery.

All four metrics (PSNR, SSIM, FSIM, ISSM) are computed per band and averaged
across bands.  PSNR/SSIM/FSIM are higher-is-better with a perfect score at
inf/1/1; ISSM scores identical images at (a+b+e)/(a+b+c+e) ~ 0.834 and is
not monotone under degradation (its structural term sits only in the
denominator, so a fully destroyed image drifts toward e/(b*EHS+e) ~ 0.86).
Reports still flag the per-row maximum, matching the reference convention.
Inputs can be
RasterImage objects or bare (bands, h, w) / (h, w) arrays in the 12-bit
domain.  The perceptual metrics (FSIM, ISSM) first map values linearly from
[0, peak] to [0, 255], the range their constants were calibrated for.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .edges import CannyParams, canny_edges, scharr_magnitude, shannon_entropy
from .phasecong import PhaseCongruencyParams, phase_congruency
from .raster import RasterImage, SAMPLE_MAX
from .util import parallel_map

METRIC_NAMES = ("psnr", "ssim", "fsim", "issm")


def _planes(x) -> np.ndarray:
    """Coerce RasterImage / 2D array / 3D array to (bands, h, w) float64."""
    if isinstance(x, RasterImage):
        return x.data
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 2:
        return arr[None]
    if arr.ndim == 3:
        return arr
    raise ValueError(f"expected 2D or 3D image data, got shape {arr.shape}")


def _pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    a, b = _planes(x), _planes(y)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


# ---------------------------------------------------------------------------
# PSNR
# ---------------------------------------------------------------------------


def mse(x, y) -> float:
    a, b = _pair(x, y)
    d = a - b
    return float(np.mean(d * d))


def psnr(x, y, peak: float = SAMPLE_MAX) -> float:
    """10 log10(peak^2 / MSE), MSE pooled over all bands; inf for equal inputs."""
    err = mse(x, y)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / err)


# ---------------------------------------------------------------------------
# SSIM
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SsimParams:
    """Gaussian-window SSIM constants; defaults follow the standard choice."""

    peak: float = SAMPLE_MAX
    k1: float = 0.01
    k2: float = 0.03
    window: int = 11
    sigma: float = 1.5

    def __post_init__(self) -> None:
        if self.window % 2 == 0 or self.window < 3:
            raise ValueError("window must be odd and >= 3")

    @property
    def c1(self) -> float:
        return (self.k1 * self.peak) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.peak) ** 2


def _gauss_kernel(window: int, sigma: float) -> np.ndarray:
    t = np.arange(window, dtype=np.float64) - (window - 1) / 2.0
    g = np.exp(-(t**2) / (2.0 * sigma**2))
    return g / g.sum()


def _windowed(a: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Separable Gaussian-weighted window means over fully valid positions."""
    r = len(g) // 2
    t = ndimage.correlate1d(a, g, axis=0, mode="constant")[r:-r, :]
    return ndimage.correlate1d(t, g, axis=1, mode="constant")[:, r:-r]


def _ssim_band(x: np.ndarray, y: np.ndarray, p: SsimParams) -> float:
    if min(x.shape) < p.window:
        raise ValueError(f"image {x.shape} smaller than the {p.window}x{p.window} SSIM window")
    g = _gauss_kernel(p.window, p.sigma)
    mu1 = _windowed(x, g)
    mu2 = _windowed(y, g)
    s11 = _windowed(x * x, g) - mu1 * mu1
    s22 = _windowed(y * y, g) - mu2 * mu2
    s12 = _windowed(x * y, g) - mu1 * mu2
    num = (2.0 * mu1 * mu2 + p.c1) * (2.0 * s12 + p.c2)
    den = (mu1 * mu1 + mu2 * mu2 + p.c1) * (s11 + s22 + p.c2)
    return float(np.mean(num / den))


def ssim(x, y, params: SsimParams = SsimParams()) -> float:
    """Mean structural similarity: per band over valid window positions, then
    averaged across bands."""
    a, b = _pair(x, y)
    return float(np.mean([_ssim_band(a[i], b[i], params) for i in range(a.shape[0])]))


# ---------------------------------------------------------------------------
# FSIM
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FsimParams:
    """Feature-similarity constants; t1 weights phase congruency, t2 gradients."""

    peak: float = SAMPLE_MAX
    t1: float = 0.85
    t2: float = 160.0
    pc: PhaseCongruencyParams = field(default_factory=PhaseCongruencyParams)


def _fsim_band(x: np.ndarray, y: np.ndarray, p: FsimParams) -> float:
    pc1 = phase_congruency(x, p.pc)
    pc2 = phase_congruency(y, p.pc)
    g1 = scharr_magnitude(x)
    g2 = scharr_magnitude(y)
    s_pc = (2.0 * pc1 * pc2 + p.t1) / (pc1**2 + pc2**2 + p.t1)
    s_g = (2.0 * g1 * g2 + p.t2) / (g1**2 + g2**2 + p.t2)
    pcm = np.maximum(pc1, pc2)
    den = float(pcm.sum())
    if den == 0.0:
        # No phase structure anywhere (e.g. two constant bands): by convention
        # the images are featurewise indistinguishable.
        return 1.0
    return float((s_pc * s_g * pcm).sum() / den)


def fsim(x, y, params: FsimParams = FsimParams()) -> float:
    """Feature similarity from phase congruency and Scharr gradients.

    Bands are mapped to [0, 255] first; similarity at each pixel is weighted
    by the stronger of the two phase congruency values.
    """
    a, b = _pair(x, y)
    scale = 255.0 / params.peak
    return float(
        np.mean([_fsim_band(a[i] * scale, b[i] * scale, params) for i in range(a.shape[0])])
    )


# ---------------------------------------------------------------------------
# ISSM
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IssmParams:
    """Blend weights for the edge/entropy/structure composite.

    The stabilizer e (Euler's number) keeps the ratio defined and positive:
    with EC in [-1, 1], EHS in [0, 1] and SSIM in [-1, 1] the denominator is
    at least e - 1 > 0.  A perfect match scores (0.8 + e) / (1.5 + e), not 1.
    """

    peak: float = SAMPLE_MAX
    a: float = 0.3
    b: float = 0.5
    c: float = 0.7
    stabilizer: float = math.e
    bins: int = 256
    canny: CannyParams = field(default_factory=CannyParams)
    ssim: SsimParams = field(default_factory=SsimParams)


def edge_correlation(e1: np.ndarray, e2: np.ndarray) -> float:
    """Pearson correlation of two boolean edge maps.

    Degenerate maps (no variance) correlate 1 when identical, else 0.
    """
    a = e1.astype(np.float64).ravel()
    b = e2.astype(np.float64).ravel()
    va = a.var()
    vb = b.var()
    if va == 0.0 or vb == 0.0:
        return 1.0 if np.array_equal(e1, e2) else 0.0
    return float(np.corrcoef(a, b)[0, 1])


def entropy_similarity(x: np.ndarray, y: np.ndarray, bins: int) -> float:
    """1 - |H(x) - H(y)| / log2(bins), histogram entropies over [0, 255]."""
    hx = shannon_entropy(x, bins=bins)
    hy = shannon_entropy(y, bins=bins)
    return 1.0 - abs(hx - hy) / math.log2(bins)


def _issm_band(x: np.ndarray, y: np.ndarray, p: IssmParams) -> float:
    scale = 255.0 / p.peak
    xs = x * scale
    ys = y * scale
    ec = edge_correlation(canny_edges(xs, p.canny), canny_edges(ys, p.canny))
    ehs = entropy_similarity(xs, ys, p.bins)
    structural = _ssim_band(x, y, p.ssim)
    e = p.stabilizer
    num = ec * ehs * (p.a + p.b) + e
    den = p.a * ec * ehs + p.b * ehs + p.c * structural + e
    return num / den


def issm(x, y, params: IssmParams = IssmParams()) -> float:
    """Information-theoretic similarity blending edge correlation (EC), entropy
    histogram similarity (EHS) and SSIM, per band then averaged."""
    a, b = _pair(x, y)
    return float(np.mean([_issm_band(a[i], b[i], params) for i in range(a.shape[0])]))


def issm_identity_value(params: IssmParams = IssmParams()) -> float:
    """Score ISSM assigns to a pair of identical non-degenerate images."""
    e = params.stabilizer
    return (params.a + params.b + e) / (params.a + params.b + params.c + e)


# ---------------------------------------------------------------------------
# Evaluation reports
# ---------------------------------------------------------------------------


@dataclass
class MetricReport:
    """Metric values for several candidate methods against one reference."""

    methods: tuple[str, ...]
    metrics: tuple[str, ...]
    values: dict[str, dict[str, float]]  # metric -> method -> value

    def best(self, metric: str) -> str:
        vals = self.values[metric]
        return max(vals, key=lambda m: vals[m])

    @staticmethod
    def _fmt(v: float) -> str:
        return "inf" if math.isinf(v) else f"{v:.4f}"

    def to_table(self) -> str:
        if not self.methods:
            return "metric\n------\n(no candidates)"
        width = max(8, *(len(m) for m in self.methods)) + 2
        head = "metric".ljust(8) + "".join(m.rjust(width) for m in self.methods)
        lines = [head, "-" * len(head)]
        for metric in self.metrics:
            best = self.best(metric)
            cells = []
            for method in self.methods:
                cell = self._fmt(self.values[metric][method])
                if method == best:
                    cell += "*"
                cells.append(cell.rjust(width))
            lines.append(metric.ljust(8) + "".join(cells))
        lines.append("(* best per metric; higher is better)")
        return "\n".join(lines)

    def to_json(self) -> str:
        # Infinite PSNR serialises as the string "inf" to stay valid JSON.
        def jsonable(v: float):
            return "inf" if math.isinf(v) else v

        payload = {
            "methods": list(self.methods),
            "metrics": {
                metric: {method: jsonable(self.values[metric][method]) for method in self.methods}
                for metric in self.metrics
            },
            "best": {metric: self.best(metric) for metric in self.metrics} if self.methods else {},
        }
        return json.dumps(payload, indent=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["metric"] + list(self.methods))
        for metric in self.metrics:
            writer.writerow([metric] + [self._fmt(self.values[metric][m]) for m in self.methods])
        return buf.getvalue()

    def render(self, fmt: str) -> str:
        if fmt == "table":
            return self.to_table()
        if fmt == "json":
            return self.to_json()
        if fmt == "csv":
            return self.to_csv()
        raise ValueError(f"unknown report format {fmt!r}")


def evaluate(
    reference,
    candidates: dict[str, object],
    metrics: tuple[str, ...] = METRIC_NAMES,
    ssim_params: SsimParams = SsimParams(),
    fsim_params: FsimParams = FsimParams(),
    issm_params: IssmParams = IssmParams(),
    peak: float = SAMPLE_MAX,
    threads: int = 1,
) -> MetricReport:
    """Score every candidate against the reference; returns a MetricReport.

    Candidates evaluate independently (optionally in parallel); results are
    keyed by candidate name with a stable column order.
    """
    for name in metrics:
        if name not in METRIC_NAMES:
            raise ValueError(f"unknown metric {name!r}; choose from {METRIC_NAMES}")
    if not candidates:
        return MetricReport(methods=(), metrics=tuple(metrics), values={m: {} for m in metrics})
    methods = tuple(candidates)

    def score(item: tuple[str, object]) -> dict[str, float]:
        _, img = item
        out = {}
        if "psnr" in metrics:
            out["psnr"] = psnr(reference, img, peak=peak)
        if "ssim" in metrics:
            out["ssim"] = ssim(reference, img, ssim_params)
        if "fsim" in metrics:
            out["fsim"] = fsim(reference, img, fsim_params)
        if "issm" in metrics:
            out["issm"] = issm(reference, img, issm_params)
        return out

    rows = parallel_map(score, list(candidates.items()), threads)
    values = {
        metric: {method: rows[i][metric] for i, method in enumerate(methods)}
        for metric in metrics
    }
    return MetricReport(methods=methods, metrics=tuple(metrics), values=values)
