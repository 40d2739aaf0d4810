"""Leaf detection and phase refinement.

Range FFT along fast time, energy-based bin selection inside a prior range
window, then a geometric circle fit of the I/Q samples at that bin so the
static reflection (circle centre) can be removed before taking the phase.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import windows

from .config import SPEED_OF_LIGHT, ChirpConfig
from .simulator import IqCube


class DegenerateFitError(ValueError):
    """Points are (nearly) collinear or coincident; no unique circle."""


class RangeSelectionError(ValueError):
    pass


class FitWarning(UserWarning):
    pass


@dataclass
class RangeProfile:
    energy_per_bin: np.ndarray
    bin_width_m: float

    @property
    def ranges_m(self) -> np.ndarray:
        return np.arange(self.energy_per_bin.size) * self.bin_width_m


@dataclass
class CircleFit:
    center: complex
    radius: float
    rms_residual: float
    iterations: int
    converged: bool = True

    @property
    def status(self) -> str:
        return "ok" if self.converged else "not-converged"


@dataclass
class PhaseMatrix:
    phase: np.ndarray  # [chirps, frames], wrapped to (-pi, pi]
    selected_bin: int
    antenna: int


@dataclass
class DisplacementSeries:
    values: np.ndarray
    rate_hz: float | None = None
    flags: tuple = ()
    amplitude_m: float | None = None
    kurtosis: float | None = None

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def _window(kind: str, n: int) -> np.ndarray:
    kind = kind.lower()
    if kind in ("rect", "rectangular", "boxcar", "none"):
        return np.ones(n)
    if kind in ("hann", "hanning"):
        return windows.hann(n, sym=False)
    raise ValueError(f"unknown window {kind!r}")


def range_fft(cube: IqCube | np.ndarray, window: str = "hann") -> np.ndarray:
    """FFT along the ADC-sample axis; returns [frames, chirps, bins, antennas]."""
    data = cube.data if isinstance(cube, IqCube) else np.asarray(cube)
    if data.shape[2] < 2:
        raise ValueError("need at least 2 ADC samples")
    if not np.all(np.isfinite(data)):
        raise ValueError("non-finite samples in cube")
    w = _window(window, data.shape[2]).astype(data.real.dtype)
    return np.fft.fft(data * w[None, None, :, None], axis=2)


def range_profile(bins: np.ndarray, cfg: ChirpConfig) -> RangeProfile:
    """Energy |X|^2 per range bin, summed over frames, chirps and antennas."""
    energy = np.einsum("nlka,nlka->k", bins, bins.conj()).real
    return RangeProfile(np.maximum(energy, 0.0), cfg.bin_to_range(1))


def select_range_bin(profile: RangeProfile, limits) -> int:
    """Highest-energy bin whose range lies inside ``limits`` (inclusive).

    Ties go to the nearer bin.
    """
    lo, hi = limits
    if not lo < hi:
        raise RangeSelectionError("range limits must satisfy min < max")
    r = profile.ranges_m
    inside = np.flatnonzero((r >= lo) & (r <= hi))
    if inside.size == 0:
        raise RangeSelectionError(f"no range bins inside [{lo}, {hi}] m")
    e = profile.energy_per_bin[inside]
    if not np.any(e > 0):
        raise RangeSelectionError("no energy inside the range window")
    return int(inside[np.argmax(e)])


# --- circle fitting ---------------------------------------------------------

def kasa_fit(points) -> tuple[complex, float]:
    """Algebraic circle fit (Kasa): linear least squares on x^2 + y^2."""
    z = np.asarray(points, dtype=complex).ravel()
    if z.size < 3:
        raise DegenerateFitError("need at least 3 points")
    # centre the data for conditioning
    z0 = z.mean()
    scale = np.sqrt(np.mean(np.abs(z - z0) ** 2))
    if scale == 0 or not np.isfinite(scale):
        raise DegenerateFitError("all points coincide")
    u = (z - z0) / scale
    x, y = u.real, u.imag
    M = np.column_stack([x, y, np.ones_like(x)])
    rhs = x * x + y * y
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[-1] < 1e-9 * sv[0]:
        raise DegenerateFitError("points are collinear")
    sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    a, b = sol[0] / 2, sol[1] / 2
    r2 = sol[2] + a * a + b * b
    if r2 <= 0:
        raise DegenerateFitError("algebraic fit produced no real circle")
    return complex(a, b) * scale + z0, math.sqrt(r2) * scale


def fit_circle(points, *, max_iter: int = 100, rtol: float = 1e-10) -> CircleFit:
    """Geometric least-squares circle through complex ``points``.

    Minimises sum (|p - c| - r)^2 with Levenberg-Marquardt, started from the
    Kasa solution.  Stops when the relative cost change of an accepted step
    drops below ``rtol`` or after ``max_iter`` iterations; in the latter case
    the best iterate is returned with ``converged=False``.
    """
    z = np.asarray(points, dtype=complex).ravel()
    c0, r0 = kasa_fit(z)
    z0 = z.mean()
    scale = np.sqrt(np.mean(np.abs(z - z0) ** 2))
    u = (z - z0) / scale
    x, y = u.real, u.imag
    c0 = (c0 - z0) / scale
    p = np.array([c0.real, c0.imag, r0 / scale])

    def residuals(p):
        dx, dy = x - p[0], y - p[1]
        d = np.hypot(dx, dy)
        return d - p[2], dx, dy, d

    res, dx, dy, d = residuals(p)
    cost = float(res @ res)
    lam = 1e-3
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        if cost == 0.0:
            converged = True
            break
        dsafe = np.where(d > 0, d, 1.0)
        J = np.column_stack([-dx / dsafe, -dy / dsafe, -np.ones_like(x)])
        JtJ = J.T @ J
        g = J.T @ res
        accepted = False
        for _ in range(30):
            A = JtJ + lam * np.diag(np.diag(JtJ))
            try:
                step = np.linalg.solve(A, -g)
            except np.linalg.LinAlgError as exc:
                raise DegenerateFitError("singular normal equations") from exc
            p_new = p + step
            res_new, dx_new, dy_new, d_new = residuals(p_new)
            cost_new = float(res_new @ res_new)
            if cost_new <= cost:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            # no descent direction left: we are at a minimum to working precision
            converged = True
            break
        rel = (cost - cost_new) / max(cost, np.finfo(float).tiny)
        p, res, dx, dy, d, cost = p_new, res_new, dx_new, dy_new, d_new, cost_new
        lam = max(lam / 10.0, 1e-12)
        if rel < rtol:
            converged = True
            break
    if not converged:
        warnings.warn(f"circle fit did not converge in {max_iter} iterations", FitWarning)
    center = complex(p[0], p[1]) * scale + z0
    radius = abs(p[2]) * scale
    rms = math.sqrt(cost / z.size) * scale
    if radius <= 0 or not np.isfinite(radius):
        raise DegenerateFitError("fit collapsed to zero radius")
    return CircleFit(center=center, radius=radius, rms_residual=rms, iterations=it,
                     converged=converged)


def is_no_motion(points, fit: CircleFit, factor: float = 3.0) -> bool:
    """True when the arc is indistinguishable from a noise blob.

    The RMS spread of the points about their centroid must exceed
    ``factor`` times the fit's RMS residual for the circle to mean anything.
    """
    z = np.asarray(points).ravel()
    spread = float(np.sqrt(np.mean(np.abs(z - z.mean()) ** 2)))
    return spread <= factor * fit.rms_residual


def recenter_phase(points, fit: CircleFit) -> np.ndarray:
    """Angle of each sample about the fitted centre, in (-pi, pi].

    Samples that coincide with the centre have no defined angle; they are
    replaced by linear interpolation of their neighbours and a warning is
    issued.
    """
    z = np.asarray(points, dtype=complex) - fit.center
    phase = np.angle(z)
    # np.angle gives [-pi, pi]; fold -pi onto +pi
    phase = np.where(phase <= -np.pi, np.pi, phase)
    bad = np.abs(z) <= 1e-12 * max(fit.radius, 1e-300)
    if np.any(bad):
        warnings.warn(f"{int(bad.sum())} samples coincide with the circle centre; "
                      "interpolated", FitWarning)
        flat = phase.ravel()
        badf = bad.ravel()
        good = np.flatnonzero(~badf)
        if good.size == 0:
            raise DegenerateFitError("every sample sits on the circle centre")
        unwrapped = np.unwrap(flat[good])
        filled = np.interp(np.arange(flat.size), good, unwrapped)
        flat = np.angle(np.exp(1j * filled))
        phase = flat.reshape(phase.shape)
    return phase


def displacement_scale(carrier_hz: float) -> float:
    """Metres of radial motion per radian of round-trip phase."""
    if carrier_hz <= 0:
        raise ValueError("carrier_hz must be positive")
    return SPEED_OF_LIGHT / (4.0 * math.pi * carrier_hz)


def displacement_from_phase(phase_seq, carrier_hz: float, rate_hz: float | None = None) -> DisplacementSeries:
    """Unwrap a wrapped phase sequence and convert it to displacement (m)."""
    phase = np.asarray(phase_seq, dtype=float)
    return DisplacementSeries(np.unwrap(phase) * displacement_scale(carrier_hz), rate_hz)


# --- glue -------------------------------------------------------------------

def bin_samples(bins: np.ndarray, k: int, antenna: int | None = None) -> np.ndarray:
    """Complex samples at range bin ``k``: [frames, chirps] or [frames, chirps, antennas]."""
    if antenna is None:
        return bins[:, :, k, :]
    return bins[:, :, k, antenna]


def phase_matrix(samples: np.ndarray, fit: CircleFit | None, selected_bin: int, antenna: int) -> PhaseMatrix:
    """Recentered (or raw, with ``fit=None``) phase, transposed to [chirps, frames]."""
    if fit is None:
        ph = np.angle(samples)
        ph = np.where(ph <= -np.pi, np.pi, ph)
    else:
        ph = recenter_phase(samples, fit)
    return PhaseMatrix(np.ascontiguousarray(ph.T), selected_bin, antenna)


def detect_leaf(cube: IqCube, limits, window: str = "hann"):
    """Range FFT + energy + bin selection in one call; returns (bins, bin index, profile)."""
    bins = range_fft(cube, window)
    prof = range_profile(bins, cube.config)
    return bins, select_range_bin(prof, limits), prof
