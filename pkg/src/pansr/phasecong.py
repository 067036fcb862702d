"""Phase congruency maps from a log-Gabor filter bank.

Phase congruency marks features (edges, lines) where the Fourier components of
a local neighbourhood agree in phase, independent of contrast.  This follows
the classic energy formulation: a bank of log-Gabor filters over several
scales and orientations, per-orientation local energy normalised by the total
filter response amplitude, with an estimated additive-noise floor subtracted.

The returned map lies in [0, 1]; a constant band scores 0 everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PhaseCongruencyParams:
    """Filter bank geometry and noise handling.

    Scales are octave-spaced starting at `min_wavelength` pixels; `sigma_onf`
    sets the radial log-Gaussian bandwidth (0.55 is about two octaves).
    Angular width is (pi / norient) / d_theta_on_sigma.  `k_noise` is the
    number of noise standard deviations above the estimated noise energy mean
    that counts as signal.
    """

    nscale: int = 4
    norient: int = 4
    min_wavelength: float = 6.0
    mult: float = 2.0
    sigma_onf: float = 0.55
    d_theta_on_sigma: float = 1.2
    k_noise: float = 2.0
    eps: float = 1e-4
    lowpass_cutoff: float = 0.45
    lowpass_order: int = 15

    def __post_init__(self) -> None:
        if self.nscale < 1 or self.norient < 1:
            raise ValueError("need at least one scale and one orientation")
        if self.mult <= 1.0:
            raise ValueError("scale multiplier must exceed 1")
        if not (0.0 < self.sigma_onf < 1.0):
            raise ValueError("sigma_onf must lie in (0, 1)")


_BANK_CACHE: dict[tuple, np.ndarray] = {}
_BANK_CACHE_MAX = 6


def log_gabor_bank(shape: tuple[int, int], params: PhaseCongruencyParams) -> np.ndarray:
    """Frequency-domain filters, shape (norient, nscale, h, w); cached per shape."""
    key = (shape, params)
    bank = _BANK_CACHE.get(key)
    if bank is not None:
        return bank

    h, w = shape
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    radius = np.hypot(fx, fy)
    radius[0, 0] = 1.0  # placeholder; the DC gain is zeroed below
    theta = np.arctan2(-fy, fx)
    sin_t, cos_t = np.sin(theta), np.cos(theta)

    lowpass = 1.0 / (1.0 + (radius / params.lowpass_cutoff) ** (2 * params.lowpass_order))
    log_sigma = np.log(params.sigma_onf) ** 2

    radial = np.empty((params.nscale, h, w))
    for s in range(params.nscale):
        wavelength = params.min_wavelength * params.mult**s
        r = np.exp(-np.log(radius * wavelength) ** 2 / (2.0 * log_sigma)) * lowpass
        r[0, 0] = 0.0
        radial[s] = r

    sigma_theta = (np.pi / params.norient) / params.d_theta_on_sigma
    bank = np.empty((params.norient, params.nscale, h, w))
    for o in range(params.norient):
        angle = o * np.pi / params.norient
        ds = sin_t * np.cos(angle) - cos_t * np.sin(angle)
        dc = cos_t * np.cos(angle) + sin_t * np.sin(angle)
        dtheta = np.abs(np.arctan2(ds, dc))
        spread = np.exp(-(dtheta**2) / (2.0 * sigma_theta**2))
        bank[o] = radial * spread[None]

    if len(_BANK_CACHE) >= _BANK_CACHE_MAX:
        _BANK_CACHE.pop(next(iter(_BANK_CACHE)))
    _BANK_CACHE[key] = bank
    return bank


def phase_congruency(
    band: np.ndarray, params: PhaseCongruencyParams = PhaseCongruencyParams()
) -> np.ndarray:
    """Phase congruency map of one 2D band, values in [0, 1].

    Per orientation the quadrature filter responses at all scales form a local
    energy (amplitude-weighted phase agreement minus disagreement); the noise
    floor is estimated from the smallest-scale amplitude distribution assuming
    a Rayleigh model and subtracted.  The map is the thresholded energy summed
    over orientations divided by the summed response amplitudes.
    """
    band = np.asarray(band, dtype=np.float64)
    if band.ndim != 2:
        raise ValueError(f"expected a 2D band, got shape {band.shape}")
    bank = log_gabor_bank(band.shape, params)
    spectrum = np.fft.fft2(band)

    total_energy = np.zeros(band.shape)
    total_amplitude = np.zeros(band.shape)
    # Geometric series relating the smallest-scale noise amplitude to the sum
    # over scales (amplitudes fall off by 1/mult per scale for white noise).
    scale_sum = (1.0 - (1.0 / params.mult) ** params.nscale) / (1.0 - 1.0 / params.mult)

    for o in range(params.norient):
        even = np.empty((params.nscale,) + band.shape)
        odd = np.empty((params.nscale,) + band.shape)
        amp = np.empty((params.nscale,) + band.shape)
        for s in range(params.nscale):
            response = np.fft.ifft2(spectrum * bank[o, s])
            even[s] = response.real
            odd[s] = response.imag
            amp[s] = np.abs(response)

        sum_e = even.sum(axis=0)
        sum_o = odd.sum(axis=0)
        sum_amp = amp.sum(axis=0)

        norm = np.sqrt(sum_e**2 + sum_o**2) + params.eps
        mean_e = sum_e / norm
        mean_o = sum_o / norm
        energy = (even * mean_e + odd * mean_o - np.abs(even * mean_o - odd * mean_e)).sum(axis=0)

        # Rayleigh noise floor from the median smallest-scale amplitude.
        tau = np.median(amp[0]) / np.sqrt(np.log(4.0))
        total_tau = tau * scale_sum
        noise_mean = total_tau * np.sqrt(np.pi / 2.0)
        noise_sd = total_tau * np.sqrt((4.0 - np.pi) / 2.0)
        threshold = noise_mean + params.k_noise * noise_sd

        total_energy += np.maximum(energy - threshold, 0.0)
        total_amplitude += sum_amp

    return np.clip(total_energy / (total_amplitude + params.eps), 0.0, 1.0)
