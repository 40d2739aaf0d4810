"""End-to-end processing of a capture into vibration estimates.

Variants form an ablation ladder; each adds one stage to the previous:

* ``raw``       -- phase of the selected bin, first chirp, one antenna
* ``refine``    -- plus circle-fit recentering
* ``phasediff`` -- plus chirp-to-chirp differencing with IQM reduction
* ``full``      -- plus FastICA across all virtual antennas
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import bss, coherence, dsp, spectral
from .config import ChirpConfig
from .simulator import IqCube

log = logging.getLogger(__name__)

VARIANTS = ("raw", "refine", "phasediff", "full")


@dataclass
class PipelineConfig:
    variant: str = "full"
    band_hz: tuple = spectral.DEFAULT_BAND_HZ
    range_limits_m: tuple = (0.2, 1.2)
    seed: int = 0
    antenna: int = 0
    window: str = "hann"
    pad_factor: int = spectral.DEFAULT_PAD
    snr_threshold_db: float = spectral.DEFAULT_SNR_DB
    max_components: int | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")

    @property
    def ica_enabled(self) -> bool:
        return self.variant == "full"


@dataclass
class PipelineTrace:
    """Intermediate products kept for inspection and plotting."""
    selected_bin: int = -1
    profile: dsp.RangeProfile | None = None
    fits: list = field(default_factory=list)
    coherent: list = field(default_factory=list)
    series: list = field(default_factory=list)
    component_profile: bss.ComponentProfile | None = None
    separation: bss.SeparationResult | None = None
    flags: list = field(default_factory=list)


def _coherent_series(samples: np.ndarray, fit: dsp.CircleFit, k: int, antenna: int,
                     cfg: ChirpConfig, trace: PipelineTrace) -> dsp.DisplacementSeries:
    pm = dsp.phase_matrix(samples, fit, k, antenna)
    cp = coherence.iqm_reduce(coherence.chirp_phase_differences(pm, fold=True))
    trace.coherent.append(cp)
    return coherence.coherent_displacement(
        cp, cfg.carrier_hz, cfg.frame_rate_hz, cfg.frame_period_s / cfg.chirp_time_s)


def _fit(samples, trace: PipelineTrace, antenna: int):
    fit = dsp.fit_circle(samples)
    trace.fits.append(fit)
    if dsp.is_no_motion(samples, fit):
        trace.flags.append(f"no-motion-a{antenna}")
        return fit, True
    return fit, False


def _estimate(series, cfg: PipelineConfig, rate: float, index: int = 0):
    try:
        return spectral.estimate_frequency(series, cfg.band_hz, rate, pad_factor=cfg.pad_factor,
                                           window=cfg.window, snr_threshold_db=cfg.snr_threshold_db,
                                           source_index=index)
    except spectral.NoVibrationError:
        return None


def run_pipeline(cube: IqCube, cfg: PipelineConfig | None = None,
                 trace: PipelineTrace | None = None) -> list[spectral.VibrationEstimate]:
    """Process ``cube`` with the configured variant.

    Returns estimates ordered by decreasing amplitude; empty when nothing
    vibrates above the detection threshold.
    """
    cfg = cfg or PipelineConfig()
    trace = trace if trace is not None else PipelineTrace()
    bins, k, prof = dsp.detect_leaf(cube, cfg.range_limits_m, cfg.window)
    trace.selected_bin, trace.profile = k, prof
    return process_bin(dsp.bin_samples(bins, k), cube.config, cfg, trace, k)


def run_variants(cube: IqCube, variants=VARIANTS, cfg: PipelineConfig | None = None,
                 traces: dict | None = None) -> dict[str, list[spectral.VibrationEstimate]]:
    """Run several ladder variants on one cube, sharing the range FFT."""
    cfg = cfg or PipelineConfig()
    bins, k, prof = dsp.detect_leaf(cube, cfg.range_limits_m, cfg.window)
    at_bin = dsp.bin_samples(bins, k)
    out = {}
    for v in variants:
        tr = PipelineTrace(selected_bin=k, profile=prof)
        out[v] = process_bin(at_bin, cube.config, replace(cfg, variant=v), tr, k)
        if traces is not None:
            traces[v] = tr
    return out


def process_bin(at_bin: np.ndarray, chirp: ChirpConfig, cfg: PipelineConfig,
                trace: PipelineTrace, k: int = -1) -> list[spectral.VibrationEstimate]:
    """Everything after bin selection; ``at_bin`` is [frames, chirps, antennas]."""
    rate = chirp.frame_rate_hz
    carrier = chirp.carrier_hz

    if cfg.variant in ("raw", "refine", "phasediff"):
        x = at_bin[:, :, cfg.antenna]
        if cfg.variant == "raw":
            series = dsp.displacement_from_phase(np.angle(x[:, 0]), carrier, rate)
        else:
            fit, still = _fit(x, trace, cfg.antenna)
            if still:
                return []
            if cfg.variant == "refine":
                series = dsp.displacement_from_phase(dsp.recenter_phase(x[:, 0], fit), carrier, rate)
            else:
                series = _coherent_series(x, fit, k, cfg.antenna, chirp, trace)
        trace.series.append(series)
        est = _estimate(series, cfg, rate)
        return [] if est is None else [est]

    rows = []
    for a in range(at_bin.shape[2]):
        x = at_bin[:, :, a]
        try:
            fit, still = _fit(x, trace, a)
        except dsp.DegenerateFitError:
            trace.flags.append(f"degenerate-a{a}")
            continue
        if still:
            continue
        rows.append(_coherent_series(x, fit, k, a, chirp, trace).values)
    if not rows:
        return []
    X = bss.prepare_observations(np.vstack(rows))
    if X.shape[0] == 1:
        series = dsp.DisplacementSeries(X[0], rate)
        trace.series.append(series)
        est = _estimate(series, cfg, rate)
        return [] if est is None else [est]

    profile = bss.kurtosis_profile(X, cfg.seed, cfg.max_components)
    trace.component_profile = profile
    trace.flags.extend(profile.flags)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", bss.ConvergenceWarning)
        sep = bss.fast_ica(X, profile.count, seed=cfg.seed)
    trace.separation = sep
    if not sep.converged:
        trace.flags.append("ica-not-converged")
    sources = bss.reconstruct_sources(sep, rate)
    trace.series.extend(sources)
    out = []
    for i, s in enumerate(sources):
        est = _estimate(s, cfg, rate, index=i)
        if est is not None:
            out.append(est)
    return out
