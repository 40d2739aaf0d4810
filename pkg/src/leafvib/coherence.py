"""Coherent phase differencing across chirps with interquartile-mean reduction.

Each chirp's phase sequence is unwrapped along frames on its own; unwrap
slips then show up as isolated +-2pi steps in the chirp-to-chirp differences,
which sit in the tails of the per-frame distribution and are dropped by the
interquartile mean.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dsp import DisplacementSeries, PhaseMatrix, displacement_scale

MIN_IQM_ROWS = 4


@dataclass
class PhaseDiffMatrix:
    dphi: np.ndarray  # [chirps - 1, frames]

    def __post_init__(self):
        if self.dphi.ndim != 2:
            raise ValueError("dphi must be 2-D [chirp pairs, frames]")
        if not np.all(np.isfinite(self.dphi)):
            raise ValueError("dphi contains non-finite values")


@dataclass
class CoherentPhase:
    series: np.ndarray        # cumulative phase per frame, series[0] == 0
    increments: np.ndarray    # reduced per-frame chirp-to-chirp phase difference
    iqr_bounds: np.ndarray    # [frames, 2] -> (q1, q3)
    rejected_fraction: float
    method: str = "iqm"

    @property
    def iqr_width(self) -> np.ndarray:
        return self.iqr_bounds[:, 1] - self.iqr_bounds[:, 0]


def chirp_phase_differences(pm: PhaseMatrix | np.ndarray, *, align_rows: bool = True,
                            fold: bool = False) -> PhaseDiffMatrix:
    """unwrap(phi_{l+1}) - unwrap(phi_l) along frames, for l = 1..L-1.

    With ``align_rows`` each difference row is shifted by the multiple of
    2pi that brings its first frame into (-pi, pi]; rows that start on
    opposite sides of the branch cut would otherwise carry a permanent 2pi
    offset.

    ``fold`` maps every entry into (-pi, pi].  Consecutive chirps are tens of
    microseconds apart, so the true difference is far below pi and folding is
    lossless; it also removes the lasting 2pi offset a chirp row picks up
    when its frame-rate unwrap slips during fast motion, which a single
    isolated fault would not leave behind.
    """
    phase = pm.phase if isinstance(pm, PhaseMatrix) else np.asarray(pm, dtype=float)
    if phase.ndim != 2 or phase.shape[0] < 2:
        raise ValueError("need at least 2 chirps to difference")
    u = np.unwrap(phase, axis=1)
    d = u[1:] - u[:-1]
    if align_rows:
        d = d - 2 * np.pi * np.round(d[:, :1] / (2 * np.pi))
    if fold:
        d = d - 2 * np.pi * np.round(d / (2 * np.pi))
    return PhaseDiffMatrix(d)


def iqm_reduce(dm: PhaseDiffMatrix | np.ndarray) -> CoherentPhase:
    """Per-frame interquartile mean over the chirp axis, then cumulative sum.

    Quartiles use linear interpolation between order statistics; values in
    [Q1, Q3] (inclusive) are averaged.  Fewer than four difference rows fall
    back to the median with a warning.
    """
    d = dm.dphi if isinstance(dm, PhaseDiffMatrix) else np.asarray(dm, dtype=float)
    rows = d.shape[0]
    if rows < 1:
        raise ValueError("empty phase-difference matrix")
    q1, q3 = np.percentile(d, [25, 75], axis=0, method="linear")
    if rows < MIN_IQM_ROWS:
        warnings.warn(f"only {rows} chirp differences per frame; using the median", RuntimeWarning)
        inc = np.median(d, axis=0)
        rejected = 0.0
        method = "median"
    else:
        keep = (d >= q1) & (d <= q3)
        inc = np.where(keep, d, 0.0).sum(axis=0) / keep.sum(axis=0)
        rejected = float(1.0 - keep.mean())
        method = "iqm"
    series = np.cumsum(inc) - inc[0]
    return CoherentPhase(series=series, increments=inc, iqr_bounds=np.column_stack([q1, q3]),
                         rejected_fraction=rejected, method=method)


def interquartile_mean(values, axis=None):
    """IQM of ``values`` with inclusive linear-interpolation quartiles."""
    v = np.asarray(values, dtype=float)
    q1, q3 = np.percentile(v, [25, 75], axis=axis, keepdims=True, method="linear")
    keep = (v >= q1) & (v <= q3)
    out = np.where(keep, v, 0.0).sum(axis=axis) / keep.sum(axis=axis)
    return out


def coherent_displacement(cp: CoherentPhase, carrier_hz: float, rate_hz: float | None = None,
                          increment_scale: float = 1.0) -> DisplacementSeries:
    """Scale the cumulative coherent phase to metres.

    ``increment_scale`` converts a chirp-spaced increment to a frame-spaced
    one (frame period / chirp repetition time) when true displacement units
    are wanted; the default leaves the phase as-is.
    """
    vals = cp.series * increment_scale * displacement_scale(carrier_hz)
    return DisplacementSeries(vals, rate_hz)
