"""Vibration frequency from a displacement series.

Hann-windowed, zero-padded FFT magnitude with three-point parabolic
refinement of the in-band peak on log magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import detrend as _detrend

from .dsp import DisplacementSeries, _window

DEFAULT_BAND_HZ = (0.5, 5.0)
DEFAULT_PAD = 8
DEFAULT_SNR_DB = 6.0


class NoVibrationError(ValueError):
    """No in-band peak rises above the detection threshold."""


@dataclass
class Spectrum:
    freqs_hz: np.ndarray
    magnitude: np.ndarray
    resolution_hz: float
    window: str
    coherent_gain: float = 1.0


@dataclass
class VibrationEstimate:
    frequency_hz: float
    amplitude_m: float
    peak_snr_db: float
    source_index: int = 0


def _values(series):
    if isinstance(series, DisplacementSeries):
        return np.asarray(series.values, dtype=float), series.rate_hz
    return np.asarray(series, dtype=float), None


def psd(series, rate_hz: float | None = None, window: str = "hann", pad_factor: int = DEFAULT_PAD,
        detrend: str = "linear") -> Spectrum:
    """One-sided FFT magnitude of the detrended, windowed series.

    ``detrend`` is ``"linear"`` (default; also removes the slow drift of
    integrated phase) or ``"constant"`` (mean only).
    """
    x, r = _values(series)
    rate = rate_hz if rate_hz is not None else r
    if rate is None or rate <= 0:
        raise ValueError("sample rate required")
    if x.size < 16:
        raise ValueError(f"series too short ({x.size} < 16 samples)")
    if pad_factor < 1:
        raise ValueError("pad_factor must be >= 1")
    if detrend not in ("linear", "constant"):
        raise ValueError(f"unknown detrend {detrend!r}")
    w = _window(window, x.size)
    nfft = pad_factor * x.size
    X = np.fft.rfft(_detrend(x, type=detrend) * w, n=nfft)
    return Spectrum(np.fft.rfftfreq(nfft, 1.0 / rate), np.abs(X), rate / nfft, window,
                    coherent_gain=float(w.sum()))


def parabolic_peak(y, k: int) -> tuple[float, float]:
    """Vertex (offset, value) of the parabola through y[k-1], y[k], y[k+1]."""
    a, b, c = y[k - 1], y[k], y[k + 1]
    den = a - 2 * b + c
    if den == 0:
        return 0.0, b
    off = 0.5 * (a - c) / den
    return off, b - 0.25 * (a - c) * off


def estimate_frequency(series, band_hz=DEFAULT_BAND_HZ, rate_hz: float | None = None, *,
                       pad_factor: int = DEFAULT_PAD, window: str = "hann",
                       snr_threshold_db: float = DEFAULT_SNR_DB, source_index: int = 0) -> VibrationEstimate:
    x, _ = _values(series)
    resid = _detrend(x, type="linear")
    if not np.any(np.abs(resid) > 1e-12 * max(float(np.max(np.abs(x), initial=0.0)), np.finfo(float).tiny)):
        # nothing but a constant or a ramp: the spectrum would be round-off
        raise NoVibrationError("no vibration detected (static series)")
    spec = psd(series, rate_hz, window, pad_factor)
    lo, hi = band_hz
    nyq = spec.freqs_hz[-1]
    if not 0 <= lo < hi <= nyq + 1e-12:
        raise ValueError(f"band {band_hz} outside [0, {nyq:.2f}] Hz")
    f, mag = spec.freqs_hz, spec.magnitude
    inband = np.flatnonzero((f >= lo) & (f <= hi))
    seg = mag[inband]
    if seg.size < 3 or not np.any(seg > 0):
        raise NoVibrationError("no vibration detected (empty spectrum)")
    k = int(inband[np.argmax(seg)])
    if not (0 < k < mag.size - 1 and mag[k] >= mag[k - 1] and mag[k] >= mag[k + 1]):
        # the band maximum sits on a slope running out of the band: no in-band peak
        raise NoVibrationError(f"no vibration detected (band maximum at the {f[k]:.2f} Hz edge)")
    med = float(np.median(seg))
    snr_db = float("inf") if med == 0 else 20.0 * np.log10(mag[k] / med)
    if snr_db < snr_threshold_db:
        raise NoVibrationError(f"no vibration detected (peak {snr_db:.1f} dB above median)")
    freq, peak = f[k], mag[k]
    if mag[k - 1] > 0 and mag[k + 1] > 0:
        off, lp = parabolic_peak(np.log(mag[k - 1:k + 2]), 1)
        freq = f[k] + off * spec.resolution_hz
        peak = float(np.exp(lp))
    amp = 2.0 * peak / spec.coherent_gain
    return VibrationEstimate(float(freq), float(amp), snr_db, source_index)
