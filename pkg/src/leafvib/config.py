"""FMCW chirp configuration and derived waveform quantities."""

from __future__ import annotations

from dataclasses import dataclass, replace

from scipy.constants import c as SPEED_OF_LIGHT


class ConfigError(ValueError):
    """Raised when a chirp configuration violates its timing budget."""


@dataclass(frozen=True)
class ChirpConfig:
    # defaults reproduce the AWR1843 profile used in the lab prototype
    start_freq_hz: float = 77e9
    slope_hz_per_s: float = 99.987e12
    idle_time_s: float = 7e-6
    adc_rate_sps: float = 10e6
    adc_start_s: float = 7e-6
    chirps_per_frame: int = 128
    ramp_time_s: float = 40e-6
    adc_samples: int = 256
    frame_period_s: float = 8e-3
    num_tx: int = 3
    num_rx: int = 4
    # None -> idle + ramp
    chirp_repetition_s: float | None = None

    def __post_init__(self):
        if self.adc_samples < 2:
            raise ConfigError("adc_samples must be >= 2")
        if self.chirps_per_frame < 1:
            raise ConfigError("chirps_per_frame must be >= 1")
        for name in ("start_freq_hz", "slope_hz_per_s", "adc_rate_sps",
                     "ramp_time_s", "frame_period_s"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.adc_start_s + self.adc_samples / self.adc_rate_sps > self.ramp_time_s + 1e-12:
            raise ConfigError("ADC sampling window extends past the ramp end")
        if self.chirps_per_frame * self.chirp_time_s > self.frame_period_s * (1 + 1e-9):
            raise ConfigError(
                f"{self.chirps_per_frame} chirps x {self.chirp_time_s * 1e6:.1f} us "
                f"overflows the {self.frame_period_s * 1e3:.3f} ms frame")

    @property
    def chirp_time_s(self) -> float:
        """Chirp repetition time (start of one chirp to the start of the next)."""
        if self.chirp_repetition_s is not None:
            return self.chirp_repetition_s
        return self.idle_time_s + self.ramp_time_s

    @property
    def swept_bandwidth_hz(self) -> float:
        return self.slope_hz_per_s * self.ramp_time_s

    @property
    def sampled_bandwidth_hz(self) -> float:
        return self.slope_hz_per_s * self.adc_samples / self.adc_rate_sps

    @property
    def range_resolution_m(self) -> float:
        return SPEED_OF_LIGHT / (2.0 * self.sampled_bandwidth_hz)

    @property
    def max_range_m(self) -> float:
        # complex baseband: beat frequencies up to the ADC rate are unambiguous
        return self.range_resolution_m * self.adc_samples

    @property
    def frame_rate_hz(self) -> float:
        return 1.0 / self.frame_period_s

    @property
    def num_virtual(self) -> int:
        return self.num_tx * self.num_rx

    @property
    def carrier_hz(self) -> float:
        """Frequency at the centre of the sampled part of the ramp."""
        mid = self.adc_start_s + self.adc_samples / (2.0 * self.adc_rate_sps)
        return self.start_freq_hz + self.slope_hz_per_s * mid

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    def bin_to_range(self, k) -> float:
        return k * SPEED_OF_LIGHT * self.adc_rate_sps / (2.0 * self.slope_hz_per_s * self.adc_samples)

    def with_chirp_repetition(self, seconds: float, *, stretch_frame: bool = True) -> "ChirpConfig":
        """Copy with a new chirp repetition time.

        With ``stretch_frame`` the frame period grows to fit the chirp burst
        when the default period is too short.
        """
        frame = self.frame_period_s
        if stretch_frame:
            frame = max(frame, self.chirps_per_frame * seconds)
        return replace(self, chirp_repetition_s=seconds, frame_period_s=frame)

    def replace(self, **changes) -> "ChirpConfig":
        return replace(self, **changes)


def compact_config(chirps: int = 16, samples: int = 64, **overrides) -> ChirpConfig:
    """Default timing with fewer chirps and ADC samples, for fast simulation.

    The ADC rate is lowered in proportion to ``samples`` so the sampled
    bandwidth, range resolution and band-centre carrier are unchanged; the
    frame period stays 8 ms (125 Hz frames).
    """
    base = ChirpConfig()
    rate = base.adc_rate_sps * samples / base.adc_samples
    return ChirpConfig(chirps_per_frame=chirps, adc_samples=samples, adc_rate_sps=rate, **overrides)
