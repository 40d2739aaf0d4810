"""Synthetic FMCW baseband capture of vibrating and static reflectors.

Forward model per virtual antenna ``a``, frame ``n``, chirp ``l`` and ADC
sample ``s``::

    x[n, l, s, a] = sum_r  amp_r * exp(j * (2 pi fb_r s / fs + psi_{r,a}
                                           + 4 pi fc u_{r,a}(t_nl) / c))

where ``fb_r`` is the beat frequency of the reflector's nominal range,
``psi`` a fixed per-antenna phase, ``fc`` the band-centre carrier and
``u_{r,a}`` the line-of-sight displacement the reflector shows on antenna
``a``.  Displacements are far below one range bin, so range migration is
ignored (narrowband approximation).

Scatterers sharing a ``group`` label form one composite reflector: their
displacements are mixed through ``antenna_gains`` (one column of the mixing
matrix each) and their amplitudes add.  That keeps the per-antenna
displacement an exact linear mixture of the sources.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import SPEED_OF_LIGHT, ChirpConfig, ConfigError
from .mechanics import OscillatorParams, OverdampedError, damped_response

__all__ = [
    "Scatterer", "SceneSpec", "NoiseSpec", "IqCube",
    "beat_frequency", "phase_from_displacement", "synthesize_cube",
    "quantize_cube", "chirp_times",
]


@dataclass
class Scatterer:
    range_m: float
    rcs_gain: float = 1.0
    motion: OscillatorParams | None = None
    antenna_gains: np.ndarray | None = None
    group: str | None = None

    def __post_init__(self):
        if self.range_m < 0:
            raise ValueError("range_m must be non-negative")
        if self.rcs_gain <= 0:
            raise ValueError("rcs_gain must be positive")
        if self.antenna_gains is not None:
            g = np.asarray(self.antenna_gains, dtype=float)
            if g.ndim != 1 or np.any(g < 0) or not np.all(np.isfinite(g)):
                raise ValueError("antenna_gains must be a vector of non-negative reals")
            if self.motion is not None and not np.any(g > 0):
                raise ValueError("dynamic scatterer needs at least one non-zero antenna gain")
            self.antenna_gains = g

    @property
    def is_static(self) -> bool:
        return self.motion is None

    def gains(self, num_antennas: int) -> np.ndarray:
        if self.antenna_gains is None:
            return np.ones(num_antennas)
        if self.antenna_gains.size != num_antennas:
            raise ValueError(f"antenna_gains has {self.antenna_gains.size} entries, "
                             f"config has {num_antennas} virtual antennas")
        return self.antenna_gains


@dataclass
class SceneSpec:
    scatterers: list[Scatterer] = field(default_factory=list)
    duration_s: float = 6.0

    def num_frames(self, cfg: ChirpConfig) -> int:
        return int(round(self.duration_s * cfg.frame_rate_hz))

    @property
    def dynamic(self) -> list[Scatterer]:
        return [s for s in self.scatterers if not s.is_static]

    def truth_frequencies(self) -> list[float]:
        return [s.motion.damped_frequency_hz for s in self.dynamic]


@dataclass
class NoiseSpec:
    """Impairments added on top of the clean returns.

    ``snr_db`` is the per-ADC-sample SNR of the strongest reflector (None
    disables thermal noise), quoted for a frame of ``reference_frame_samples``
    chirp x ADC samples.  A smaller cube gets proportionally less noise per
    sample so that its range-bin and chirp-averaged noise match the full-size
    frame; set the reference to None for a literal per-sample SNR.  A fraction ``jitter_fraction`` of chirps get a
    common phase rotation drawn from N(0, jitter_std_rad).  ``flutter_rms_m``
    adds broadband micro-motion (``flutter_band_hz``) to every moving
    reflector.  ``frame_phase_std_rad`` rotates every sample of a frame by
    one N(0, sigma) draw per frame, a phase offset that changes between
    frames but not between the chirps inside one.
    """
    snr_db: float | None = None
    jitter_std_rad: float = 0.0
    jitter_fraction: float = 0.1
    flutter_rms_m: float = 0.0
    flutter_band_hz: tuple[float, float] = (15.0, 60.0)
    flutter_tones: int = 24
    frame_phase_std_rad: float = 0.0
    reference_frame_samples: int | None = 128 * 256

    @classmethod
    def clean(cls) -> "NoiseSpec":
        return cls()


@dataclass
class IqCube:
    data: np.ndarray  # [frames, chirps, samples, antennas]
    config: ChirpConfig

    def __post_init__(self):
        d = np.asarray(self.data)
        if d.ndim != 4:
            raise ValueError(f"cube must be 4-D, got shape {d.shape}")
        _, l, s, a = d.shape
        cfg = self.config
        if (l, s, a) != (cfg.chirps_per_frame, cfg.adc_samples, cfg.num_virtual):
            raise ValueError(f"cube shape {d.shape} does not match config "
                             f"(*, {cfg.chirps_per_frame}, {cfg.adc_samples}, {cfg.num_virtual})")
        if not np.all(np.isfinite(d)):
            raise ValueError("cube contains non-finite samples")
        self.data = d

    @property
    def num_frames(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self):
        return self.data.shape


def beat_frequency(d: float, cfg: ChirpConfig) -> float:
    """Beat (IF) frequency of a reflector at range ``d``: 2 d BW / (c T_r)."""
    if d < 0:
        raise ValueError("range must be non-negative")
    return 2.0 * d * cfg.swept_bandwidth_hz / (SPEED_OF_LIGHT * cfg.ramp_time_s)


def phase_from_displacement(delta_d, carrier_hz: float):
    """Round-trip phase change 4 pi f dd / c for a radial displacement (m)."""
    if carrier_hz <= 0:
        raise ValueError("carrier_hz must be positive")
    return 4.0 * math.pi * np.asarray(delta_d) * carrier_hz / SPEED_OF_LIGHT


def chirp_times(cfg: ChirpConfig, num_frames: int) -> np.ndarray:
    """Start time of every chirp, shape [frames, chirps]."""
    n = np.arange(num_frames)[:, None] * cfg.frame_period_s
    l = np.arange(cfg.chirps_per_frame)[None, :] * cfg.chirp_time_s
    return n + l


def _flutter(noise: NoiseSpec, rng: np.random.Generator, t: np.ndarray) -> np.ndarray:
    lo, hi = noise.flutter_band_hz
    k = noise.flutter_tones
    freqs = rng.uniform(lo, hi, k)
    phases = rng.uniform(0, 2 * np.pi, k)
    amp = noise.flutter_rms_m * math.sqrt(2.0 / k)
    out = np.zeros_like(t)
    for f, p in zip(freqs, phases):
        out += amp * np.cos(2 * np.pi * f * t + p)
    return out


def _reflectors(scene: SceneSpec, cfg: ChirpConfig):
    """Collapse grouped scatterers into composite reflectors.

    Yields (range_m, amplitude, [(motion, gains), ...]) tuples.
    """
    res = cfg.range_resolution_m
    groups: dict[str, list[Scatterer]] = {}
    singles: list[Scatterer] = []
    for s in scene.scatterers:
        if s.group is None:
            singles.append(s)
        else:
            groups.setdefault(s.group, []).append(s)
    out = []
    for s in singles:
        movers = [] if s.is_static else [(s.motion, s.gains(cfg.num_virtual))]
        out.append((s.range_m, s.rcs_gain, movers))
    for name, members in groups.items():
        ranges = [m.range_m for m in members]
        if max(ranges) - min(ranges) > 0.5 * res:
            raise ValueError(f"group {name!r} spans more than one range bin")
        movers = [(m.motion, m.gains(cfg.num_virtual)) for m in members if not m.is_static]
        out.append((float(np.mean(ranges)), sum(m.rcs_gain for m in members), movers))

    ungrouped = sorted(s.range_m for s in singles if not s.is_static)
    for a, b in zip(ungrouped, ungrouped[1:]):
        if b - a < res:
            raise ValueError("dynamic scatterers closer than one range bin must share a group")
    return out


def synthesize_cube(scene: SceneSpec, cfg: ChirpConfig, noise: NoiseSpec | None = None,
                    seed: int = 0, *, quantize: bool = False, dtype=np.complex64) -> IqCube:
    """Render ``scene`` into a baseband cube [frames, chirps, samples, antennas].

    Random draws come from per-frame substreams of ``seed`` so the output
    does not depend on how frames are scheduled.
    """
    noise = noise or NoiseSpec()
    n_frames = scene.num_frames(cfg)
    if n_frames < 1:
        raise ValueError("scene shorter than one frame")
    L, S, A = cfg.chirps_per_frame, cfg.adc_samples, cfg.num_virtual
    for s in scene.scatterers:
        if s.range_m >= cfg.max_range_m:
            raise ConfigError(f"scatterer at {s.range_m} m beyond max range {cfg.max_range_m:.2f} m")
        if s.motion is not None and s.motion.damping_ratio >= 1:
            raise OverdampedError(f"scatterer at {s.range_m} m is overdamped")

    root = np.random.SeedSequence(seed)
    scene_ss, noise_ss = root.spawn(2)
    scene_rng = np.random.default_rng(scene_ss)
    frame_streams = noise_ss.spawn(n_frames)

    t = chirp_times(cfg, n_frames)
    fs = cfg.adc_rate_sps
    fc = cfg.carrier_hz
    k_phase = 4.0 * math.pi * fc / SPEED_OF_LIGHT
    sample_idx = np.arange(S)

    reflectors = _reflectors(scene, cfg)
    flutter = None
    if noise.flutter_rms_m > 0:
        flutter = _flutter(noise, scene_rng, t)

    cube = np.zeros((n_frames, L, S, A), dtype=dtype)
    strongest = 0.0
    for rng_m, amp, movers in reflectors:
        strongest = max(strongest, amp)
        psi = scene_rng.uniform(0, 2 * np.pi, A) + k_phase * rng_m
        tone = np.exp(2j * np.pi * beat_frequency(rng_m, cfg) * sample_idx / fs)
        phase = np.broadcast_to(psi, (n_frames, L, A)).copy()
        for motion, gains in movers:
            u = damped_response(motion, t)
            if flutter is not None:
                u = u + flutter
            phase += k_phase * u[:, :, None] * gains[None, None, :]
        base = amp * np.exp(1j * phase)
        cube += (base[:, :, None, :] * tone[None, None, :, None]).astype(dtype)

    use_jitter = noise.jitter_std_rad > 0 and noise.jitter_fraction > 0
    use_thermal = noise.snr_db is not None and strongest > 0
    use_frame = noise.frame_phase_std_rad > 0
    if use_jitter or use_thermal or use_frame:
        sigma = strongest / math.sqrt(10 ** (noise.snr_db / 10)) if use_thermal else 0.0
        if noise.reference_frame_samples:
            sigma *= math.sqrt(L * S / noise.reference_frame_samples)
        for n, ss in enumerate(frame_streams):
            rng = np.random.default_rng(ss)
            if use_jitter:
                hit = rng.random(L) < noise.jitter_fraction
                rot = np.where(hit, rng.normal(0.0, noise.jitter_std_rad, L), 0.0)
                cube[n] *= np.exp(1j * rot)[:, None, None].astype(dtype)
            if use_frame:
                cube[n] *= dtype(np.exp(1j * rng.normal(0.0, noise.frame_phase_std_rad)))
            if use_thermal:
                w = rng.standard_normal((L, S, A, 2)) * (sigma / math.sqrt(2))
                cube[n] += (w[..., 0] + 1j * w[..., 1]).astype(dtype)

    out = IqCube(cube, cfg)
    return quantize_cube(out) if quantize else out


def quantize_cube(cube: IqCube, headroom: float = 1.5) -> IqCube:
    """Map the cube to int16 ADC codes, full scale at ``headroom`` x peak |I|,|Q|."""
    d = cube.data
    peak = float(max(np.max(np.abs(d.real), initial=0.0), np.max(np.abs(d.imag), initial=0.0)))
    if peak == 0:
        return IqCube(np.zeros_like(d), cube.config)
    scale = 32767.0 / (headroom * peak)
    q = np.round(d.real * scale) + 1j * np.round(d.imag * scale)
    return IqCube(q.astype(d.dtype), cube.config)
