"""Metric suite against closed forms and naive reimplementation oracles.

The SSIM oracle is a literal double loop over every valid 11x11 window; the
ISSM oracle recomposes the blend from directly-computed Pearson/entropy/SSIM
terms.  Both are deliberately written with none of the package's windowing
or report machinery.
"""

from __future__ import annotations

import json
import math

import numpy as np
import pytest

from conftest import random_image, textured_image

from pansr.edges import canny_edges
from pansr.metrics import (
    METRIC_NAMES,
    FsimParams,
    IssmParams,
    MetricReport,
    SsimParams,
    edge_correlation,
    entropy_similarity,
    evaluate,
    fsim,
    issm,
    issm_identity_value,
    mse,
    psnr,
    ssim,
)
from pansr.raster import SAMPLE_MAX


# ---------------------------------------------------------------------------
# Naive oracles
# ---------------------------------------------------------------------------


def naive_ssim(a: np.ndarray, b: np.ndarray, p: SsimParams = SsimParams()) -> float:
    """Literal SSIM: loop over every fully-inside window, direct weighted sums."""
    t = np.arange(p.window, dtype=np.float64) - (p.window - 1) / 2.0
    g = np.exp(-(t**2) / (2.0 * p.sigma**2))
    g /= g.sum()
    w = np.outer(g, g)
    r = p.window // 2
    band_scores = []
    for band in range(a.shape[0]):
        x, y = a[band], b[band]
        h, wd = x.shape
        scores = []
        for i in range(r, h - r):
            for j in range(r, wd - r):
                wx = x[i - r : i + r + 1, j - r : j + r + 1]
                wy = y[i - r : i + r + 1, j - r : j + r + 1]
                mu1 = float((w * wx).sum())
                mu2 = float((w * wy).sum())
                s11 = float((w * wx * wx).sum()) - mu1 * mu1
                s22 = float((w * wy * wy).sum()) - mu2 * mu2
                s12 = float((w * wx * wy).sum()) - mu1 * mu2
                num = (2.0 * mu1 * mu2 + p.c1) * (2.0 * s12 + p.c2)
                den = (mu1 * mu1 + mu2 * mu2 + p.c1) * (s11 + s22 + p.c2)
                scores.append(num / den)
        band_scores.append(float(np.mean(scores)))
    return float(np.mean(band_scores))


def naive_issm(a: np.ndarray, b: np.ndarray, p: IssmParams = IssmParams()) -> float:
    """ISSM blend recomposed from first principles.

    Edge maps come from the (separately validated) Canny; correlation,
    entropy and SSIM terms are computed directly rather than through the
    package helpers.
    """
    scale = 255.0 / p.peak
    band_scores = []
    for band in range(a.shape[0]):
        x, y = a[band], b[band]
        xs, ys = x * scale, y * scale

        e1 = canny_edges(xs, p.canny).ravel().astype(np.float64)
        e2 = canny_edges(ys, p.canny).ravel().astype(np.float64)
        if e1.var() == 0.0 or e2.var() == 0.0:
            ec = 1.0 if np.array_equal(e1, e2) else 0.0
        else:
            ec = float(((e1 - e1.mean()) * (e2 - e2.mean())).mean() / (e1.std() * e2.std()))

        def entropy_bits(z: np.ndarray) -> float:
            zc = np.clip(z, 0.0, 255.0)
            idx = np.minimum((zc / 255.0 * p.bins).astype(np.int64), p.bins - 1)
            counts = np.bincount(idx.ravel(), minlength=p.bins)
            probs = counts / counts.sum()
            nz = probs[probs > 0]
            return float(-(nz * np.log2(nz)).sum())

        ehs = 1.0 - abs(entropy_bits(xs) - entropy_bits(ys)) / math.log2(p.bins)
        structural = naive_ssim(x[None], y[None], p.ssim)
        e = p.stabilizer
        num = ec * ehs * (p.a + p.b) + e
        den = p.a * ec * ehs + p.b * ehs + p.c * structural + e
        band_scores.append(num / den)
    return float(np.mean(band_scores))


def _noisy(img, sigma: float, seed: int):
    rng = np.random.default_rng(seed)
    return np.clip(img.data + rng.normal(0.0, sigma, img.data.shape), 0.0, SAMPLE_MAX)


# ---------------------------------------------------------------------------
# PSNR
# ---------------------------------------------------------------------------


class TestPsnr:
    def test_identity_is_infinite(self):
        for seed in range(10):
            img = random_image(seed)
            assert psnr(img, img) == math.inf

    def test_closed_form_unit_error(self):
        # x = 0, y = 1 everywhere: MSE 1, PSNR = 20 log10(4095) = 72.245 dB.
        x = np.zeros((4, 32, 32))
        y = np.ones((4, 32, 32))
        assert psnr(x, y) == pytest.approx(72.2451, abs=1e-3)
        assert psnr(x, y) == pytest.approx(20.0 * math.log10(4095.0), abs=1e-12)

    def test_closed_form_full_scale_error(self):
        # x = 0, y = 4095: MSE = peak^2, so PSNR is exactly 0 dB.
        x = np.zeros((4, 16, 16))
        y = np.full((4, 16, 16), 4095.0)
        assert psnr(x, y) == 0.0

    def test_pooled_band_mse(self):
        # One band off by 2, the rest equal: pooled MSE = 4/4 = 1.
        x = np.zeros((4, 8, 8))
        y = x.copy()
        y[2] += 2.0
        assert mse(x, y) == pytest.approx(1.0)
        assert psnr(x, y) == pytest.approx(20.0 * math.log10(4095.0), abs=1e-12)

    def test_symmetry(self):
        a, b = textured_image(0), textured_image(1)
        assert psnr(a, b) == psnr(b, a)

    def test_strictly_decreasing_under_noise(self):
        ref = textured_image(5)
        values = [psnr(ref, _noisy(ref, s, 7)) for s in (10.0, 50.0, 200.0, 800.0)]
        assert all(x > y for x, y in zip(values, values[1:]))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="differ"):
            psnr(np.zeros((4, 8, 8)), np.zeros((4, 9, 9)))


# ---------------------------------------------------------------------------
# SSIM
# ---------------------------------------------------------------------------


class TestSsim:
    def test_identity_is_one(self):
        for seed in range(10):
            img = random_image(seed)
            assert ssim(img, img) == pytest.approx(1.0, abs=1e-9)

    def test_matches_naive_oracle(self):
        # Criterion oracle: 20 seeded 32x32 pairs, agreement within 1e-8.
        rng = np.random.default_rng(2024)
        for _ in range(20):
            a = rng.uniform(0, SAMPLE_MAX, size=(4, 32, 32))
            b = np.clip(a + rng.normal(0, 300, size=a.shape), 0, SAMPLE_MAX)
            assert ssim(a, b) == pytest.approx(naive_ssim(a, b), abs=1e-8)

    def test_symmetry(self):
        a, b = textured_image(2), textured_image(3)
        assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)

    def test_decreases_under_noise(self):
        ref = textured_image(4)
        values = [1.0] + [ssim(ref, _noisy(ref, s, 11)) for s in (30.0, 150.0, 700.0)]
        assert all(x > y for x, y in zip(values, values[1:]))

    def test_bounded_above_by_one(self):
        a, b = textured_image(6), textured_image(7)
        assert ssim(a, b) < 1.0

    def test_window_larger_than_image_rejected(self):
        small = np.zeros((4, 8, 8))
        with pytest.raises(ValueError, match="window"):
            ssim(small, small)

    def test_even_window_rejected(self):
        with pytest.raises(ValueError):
            SsimParams(window=10)

    def test_constant_shift_closed_form(self):
        # On constant bands all variances vanish, so the contrast/structure
        # factor is exactly c2/c2 = 1 and SSIM reduces to the luminance term
        # (2 mu1 mu2 + c1) / (mu1^2 + mu2^2 + c1).
        p = SsimParams()
        x = np.full((1, 32, 32), 2000.0)
        y = np.full((1, 32, 32), 2400.0)
        expect = (2.0 * 2000.0 * 2400.0 + p.c1) / (2000.0**2 + 2400.0**2 + p.c1)
        assert ssim(x, y, p) == pytest.approx(expect, abs=1e-9)
        assert expect < 1.0


# ---------------------------------------------------------------------------
# FSIM
# ---------------------------------------------------------------------------


class TestFsim:
    def test_identity_is_one(self):
        for seed in range(10):
            img = textured_image(seed)
            assert fsim(img, img) == pytest.approx(1.0, abs=1e-6)

    def test_constant_pair_convention(self):
        # No phase structure anywhere: scored as indistinguishable.
        flat = np.full((4, 32, 32), 1000.0)
        assert fsim(flat, flat) == 1.0

    def test_symmetry(self):
        a, b = textured_image(10), textured_image(11)
        assert fsim(a, b) == pytest.approx(fsim(b, a), abs=1e-12)

    def test_range(self):
        a, b = textured_image(12), textured_image(13)
        v = fsim(a, b)
        assert 0.0 < v < 1.0

    def test_decreases_under_noise(self):
        ref = textured_image(14)
        values = [fsim(ref, ref)] + [fsim(ref, _noisy(ref, s, 17)) for s in (80.0, 400.0, 1200.0)]
        assert all(x > y for x, y in zip(values, values[1:]))

    def test_blur_penalized(self):
        from scipy import ndimage

        ref = textured_image(15)
        blurred = np.stack([ndimage.uniform_filter(b, 5) for b in ref.data])
        assert fsim(ref, blurred) < 0.98


# ---------------------------------------------------------------------------
# ISSM
# ---------------------------------------------------------------------------


class TestIssm:
    def test_identity_value_closed_form(self):
        # EC = EHS = SSIM = 1: ISSM = (a + b + e) / (a + b + c + e).
        expect = (0.3 + 0.5 + math.e) / (0.3 + 0.5 + 0.7 + math.e)
        assert issm_identity_value() == pytest.approx(expect, abs=1e-15)
        assert expect == pytest.approx(0.834, abs=5e-4)

    def test_identity_images_score_identity_value(self):
        for seed in range(5):
            img = textured_image(seed)
            assert issm(img, img) == pytest.approx(issm_identity_value(), abs=1e-12)

    def test_matches_naive_oracle(self):
        # Criterion oracle: fixed 20-pair corpus, agreement within 1e-6.
        rng = np.random.default_rng(555)
        for k in range(20):
            ref = textured_image(100 + k, size=48)
            sigma = float(rng.uniform(20.0, 600.0))
            cand = np.clip(ref.data + rng.normal(0, sigma, ref.data.shape), 0, SAMPLE_MAX)
            assert issm(ref, cand) == pytest.approx(naive_issm(ref.data, cand), abs=1e-6)

    def test_degradation_ordering_matches_oracle(self):
        # The package must rank a degradation ladder exactly as the naive
        # recomposition does.  Note ISSM itself is not monotone in quality:
        # its SSIM term sits only in the denominator, so heavy degradation
        # can score above the identity plateau.  Conformance means agreeing
        # with the reference formula's ordering, whatever it is.
        from scipy import ndimage

        ref = textured_image(200, size=48)
        candidates = {
            "identity": ref.data.copy(),
            "blur": np.stack([ndimage.uniform_filter(b, 3) for b in ref.data]),
            "noise_light": _noisy(ref, 100.0, 1),
            "noise_heavy": _noisy(ref, 900.0, 2),
        }
        package = {k: issm(ref, v) for k, v in candidates.items()}
        oracle = {k: naive_issm(ref.data, v) for k, v in candidates.items()}
        pkg_order = sorted(package, key=package.get, reverse=True)
        orc_order = sorted(oracle, key=oracle.get, reverse=True)
        assert pkg_order == orc_order
        assert package["identity"] == pytest.approx(issm_identity_value(), abs=1e-12)

    def test_noise_ladder_matches_oracle(self):
        # Every rung of a noise ladder agrees with the recomposed formula,
        # including the non-monotone tail: as EC and SSIM collapse, ISSM
        # drifts toward e / (b * EHS + e), which exceeds the identity value.
        ref = textured_image(201, size=48)
        ladder = [ref.data] + [_noisy(ref, s, 3) for s in (150.0, 600.0, 1500.0)]
        pkg = [issm(ref, c) for c in ladder]
        orc = [naive_issm(ref.data, c) for c in ladder]
        for p_val, o_val in zip(pkg, orc):
            assert p_val == pytest.approx(o_val, abs=1e-6)
        assert np.argsort(pkg).tolist() == np.argsort(orc).tolist()

    def test_symmetry(self):
        a, b = textured_image(16), textured_image(17)
        assert issm(a, b) == pytest.approx(issm(b, a), abs=1e-12)

    def test_edge_correlation_degenerate_cases(self):
        empty = np.zeros((8, 8), dtype=bool)
        some = empty.copy()
        some[2, 3] = True
        assert edge_correlation(empty, empty) == 1.0
        assert edge_correlation(empty, some) == 0.0
        assert edge_correlation(some, some) == pytest.approx(1.0)

    def test_edge_correlation_is_pearson(self):
        rng = np.random.default_rng(9)
        e1 = rng.uniform(size=(16, 16)) > 0.5
        e2 = rng.uniform(size=(16, 16)) > 0.5
        expect = np.corrcoef(e1.ravel().astype(float), e2.ravel().astype(float))[0, 1]
        assert edge_correlation(e1, e2) == pytest.approx(expect, abs=1e-12)

    def test_entropy_similarity_bounds(self):
        rng = np.random.default_rng(10)
        x = rng.uniform(0, 255, size=(32, 32))
        assert entropy_similarity(x, x, 256) == 1.0
        flat = np.zeros((32, 32))
        v = entropy_similarity(x, flat, 256)
        assert 0.0 <= v < 1.0

    def test_denominator_never_degenerate(self):
        # Worst case EC = -1 still leaves the denominator >= e - 1 > 0:
        # ISSM stays finite and positive for any inputs.
        a = textured_image(18)
        inverted = SAMPLE_MAX - a.data
        v = issm(a, inverted)
        assert math.isfinite(v) and v > 0.0


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def _tiny_report() -> MetricReport:
    return MetricReport(
        methods=("bicubic", "srcnn"),
        metrics=("psnr", "ssim"),
        values={
            "psnr": {"bicubic": 31.9, "srcnn": 28.5},
            "ssim": {"bicubic": 0.65, "srcnn": 0.87},
        },
    )


class TestMetricReport:
    def test_best_per_metric(self):
        r = _tiny_report()
        assert r.best("psnr") == "bicubic"
        assert r.best("ssim") == "srcnn"

    def test_table_marks_best(self):
        table = _tiny_report().to_table()
        lines = table.splitlines()
        assert lines[0].split() == ["metric", "bicubic", "srcnn"]
        psnr_line = next(l for l in lines if l.startswith("psnr"))
        assert "31.9000*" in psnr_line and "28.5000*" not in psnr_line
        ssim_line = next(l for l in lines if l.startswith("ssim"))
        assert "0.8700*" in ssim_line

    def test_json_matches_table_content(self):
        r = _tiny_report()
        payload = json.loads(r.to_json())
        assert payload["methods"] == ["bicubic", "srcnn"]
        assert payload["metrics"]["ssim"]["srcnn"] == 0.87
        assert payload["best"] == {"psnr": "bicubic", "ssim": "srcnn"}

    def test_infinite_psnr_serializes(self):
        r = MetricReport(("x",), ("psnr",), {"psnr": {"x": math.inf}})
        payload = json.loads(r.to_json())  # must be valid JSON
        assert payload["metrics"]["psnr"]["x"] == "inf"
        assert "inf" in r.to_table()
        assert "inf" in r.to_csv()

    def test_csv_parses(self):
        import csv as csvmod
        import io

        rows = list(csvmod.reader(io.StringIO(_tiny_report().to_csv())))
        assert rows[0] == ["metric", "bicubic", "srcnn"]
        assert rows[1][0] == "psnr" and float(rows[1][1]) == pytest.approx(31.9)

    def test_render_dispatch_and_unknown(self):
        r = _tiny_report()
        assert r.render("table") == r.to_table()
        assert r.render("json") == r.to_json()
        assert r.render("csv") == r.to_csv()
        with pytest.raises(ValueError, match="format"):
            r.render("yaml")

    def test_empty_report_renders(self):
        r = MetricReport((), METRIC_NAMES, {m: {} for m in METRIC_NAMES})
        assert "(no candidates)" in r.to_table()
        payload = json.loads(r.to_json())
        assert payload["methods"] == [] and payload["best"] == {}
        assert r.to_csv().splitlines()[0] == "metric"


class TestEvaluate:
    def test_scores_candidates_with_stable_order(self):
        ref = textured_image(30, size=32)
        cands = {
            "noisy": _noisy(ref, 200.0, 0),
            "identity": ref.data.copy(),
        }
        report = evaluate(ref, cands, metrics=("psnr", "ssim"))
        assert report.methods == ("noisy", "identity")
        assert report.values["psnr"]["identity"] == math.inf
        assert report.best("psnr") == "identity"
        assert report.best("ssim") == "identity"

    def test_all_metrics_on_real_pair(self):
        ref = textured_image(31, size=48)
        report = evaluate(ref, {"cand": _noisy(ref, 150.0, 1)})
        assert report.metrics == METRIC_NAMES
        for metric in METRIC_NAMES:
            assert math.isfinite(report.values[metric]["cand"])

    def test_thread_count_does_not_change_values(self):
        ref = textured_image(32, size=48)
        cands = {f"c{i}": _noisy(ref, 100.0 * (i + 1), i) for i in range(4)}
        r1 = evaluate(ref, dict(cands), threads=1)
        r8 = evaluate(ref, dict(cands), threads=8)
        assert r1.values == r8.values
        assert r1.methods == r8.methods

    def test_zero_candidates_gives_empty_report(self):
        ref = textured_image(33, size=32)
        report = evaluate(ref, {})
        assert report.methods == ()
        assert "(no candidates)" in report.to_table()

    def test_unknown_metric_rejected(self):
        ref = textured_image(34, size=32)
        with pytest.raises(ValueError, match="unknown metric"):
            evaluate(ref, {"x": ref.data}, metrics=("psnr", "vif"))

    def test_raster_and_array_inputs_agree(self):
        ref = textured_image(35, size=32)
        cand = _noisy(ref, 100.0, 2)
        from pansr.raster import RasterImage

        as_img = RasterImage(cand, ("R", "G", "B", "NIR"))
        r_arr = evaluate(ref, {"c": cand}, metrics=("psnr", "ssim"))
        r_img = evaluate(ref.data, {"c": as_img}, metrics=("psnr", "ssim"))
        assert r_arr.values == r_img.values
