"""Lumped mechanical models of a leaf on its petiole.

The leaf is a tip mass on a cantilever; its first bending mode behaves as a
spring-mass-damper. These closed forms drive the simulator and double as
analytic oracles in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

STANDARD_GRAVITY = 9.80665
DEFAULT_DAMPING_RATIO = 0.05


class OverdampedError(ValueError):
    """The oscillator does not ring (damping ratio >= 1)."""


@dataclass(frozen=True)
class OscillatorParams:
    mass_kg: float
    damping_coeff: float
    stiffness: float
    forcing_amplitude: float
    onset_time_s: float = 0.0

    def __post_init__(self):
        if self.mass_kg <= 0:
            raise ValueError("mass_kg must be positive")
        if self.stiffness <= 0:
            raise ValueError("stiffness must be positive")
        if self.damping_coeff < 0:
            raise ValueError("damping_coeff must be non-negative")
        if self.onset_time_s < 0:
            raise ValueError("onset_time_s must be non-negative")

    @property
    def omega_n(self) -> float:
        return natural_frequency(self.stiffness, self.mass_kg)

    @property
    def damping_ratio(self) -> float:
        return self.damping_coeff / (2.0 * math.sqrt(self.stiffness * self.mass_kg))

    @property
    def omega_d(self) -> float:
        zeta = self.damping_ratio
        if zeta >= 1.0:
            raise OverdampedError(f"damping ratio {zeta:.3f} >= 1")
        return self.omega_n * math.sqrt(1.0 - zeta * zeta)

    @property
    def amplitude_m(self) -> float:
        """Peak of the undamped envelope, F / (m * omega_d)."""
        return self.forcing_amplitude / (self.mass_kg * self.omega_d)

    @property
    def damped_frequency_hz(self) -> float:
        return self.omega_d / (2.0 * math.pi)

    @classmethod
    def from_frequency(cls, freq_hz: float, amplitude_m: float, *,
                       damping_ratio: float = DEFAULT_DAMPING_RATIO,
                       mass_kg: float = 1e-3, onset_time_s: float = 0.0) -> "OscillatorParams":
        """Build an oscillator that rings at ``freq_hz`` (damped) with a given envelope peak.

        Stiffness and damping are chosen so the *damped* frequency equals
        ``freq_hz``; the impulse is scaled to hit ``amplitude_m``.
        """
        if not 0 <= damping_ratio < 1:
            raise OverdampedError(f"damping ratio {damping_ratio} outside [0, 1)")
        omega_d = 2.0 * math.pi * freq_hz
        omega_n = omega_d / math.sqrt(1.0 - damping_ratio ** 2)
        k = mass_kg * omega_n ** 2
        c = 2.0 * damping_ratio * math.sqrt(k * mass_kg)
        force = amplitude_m * mass_kg * omega_d
        return cls(mass_kg=mass_kg, damping_coeff=c, stiffness=k,
                   forcing_amplitude=force, onset_time_s=onset_time_s)


@dataclass(frozen=True)
class BeamParams:
    youngs_modulus_pa: float
    second_moment_m4: float
    length_m: float
    tip_mass_kg: float

    def __post_init__(self):
        for name in ("youngs_modulus_pa", "second_moment_m4", "length_m", "tip_mass_kg"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def spring_constant(beam: BeamParams) -> float:
    """Tip stiffness of an end-loaded cantilever, 3EI/L^3 (N/m)."""
    return 3.0 * beam.youngs_modulus_pa * beam.second_moment_m4 / beam.length_m ** 3


def natural_frequency(k: float, m: float) -> float:
    """Undamped angular natural frequency sqrt(k/m) in rad/s."""
    if k <= 0 or m <= 0:
        raise ValueError("stiffness and mass must be positive")
    return math.sqrt(k / m)


def natural_frequency_hz(k: float, m: float) -> float:
    return natural_frequency(k, m) / (2.0 * math.pi)


def beam_natural_frequency(beam: BeamParams) -> float:
    return natural_frequency(spring_constant(beam), beam.tip_mass_kg)


def static_deflection(k: float, force: float) -> float:
    if k <= 0:
        raise ValueError("stiffness must be positive")
    return force / k


def damped_response(osc: OscillatorParams, t):
    """Impulse response of the spring-mass-damper, zero before onset.

    x(tau) = A exp(-zeta w_n tau) cos(w_d tau - pi/2), A = F / (m w_d).
    Accepts a scalar or an array of times (s); returns the same shape.
    """
    omega_d = osc.omega_d  # raises for overdamped input
    decay = osc.damping_ratio * osc.omega_n
    t = np.asarray(t, dtype=float)
    tau = t - osc.onset_time_s
    active = tau >= 0
    tau = np.where(active, tau, 0.0)
    x = osc.amplitude_m * np.exp(-decay * tau) * np.cos(omega_d * tau - np.pi / 2)
    x = np.where(active, x, 0.0)
    return x if x.ndim else float(x)


def damped_velocity(osc: OscillatorParams, t):
    """Time derivative of :func:`damped_response`."""
    omega_d = osc.omega_d
    decay = osc.damping_ratio * osc.omega_n
    t = np.asarray(t, dtype=float)
    tau = t - osc.onset_time_s
    active = tau >= 0
    tau = np.where(active, tau, 0.0)
    env = osc.amplitude_m * np.exp(-decay * tau)
    v = env * (-decay * np.sin(omega_d * tau) + omega_d * np.cos(omega_d * tau))
    v = np.where(active, v, 0.0)
    return v if v.ndim else float(v)


def envelope(osc: OscillatorParams, t):
    t = np.asarray(t, dtype=float)
    tau = np.maximum(t - osc.onset_time_s, 0.0)
    return osc.amplitude_m * np.exp(-osc.damping_ratio * osc.omega_n * tau)


def mechanical_energy(osc: OscillatorParams, t):
    x = damped_response(osc, t)
    v = damped_velocity(osc, t)
    return 0.5 * osc.mass_kg * np.asarray(v) ** 2 + 0.5 * osc.stiffness * np.asarray(x) ** 2


# Leaf presets. Frequencies follow the healthy/stressed traces of a watered
# and a drought-stressed avocado leaf; mass and damping are assumed values.
WATERED_HZ = 2.03
STRESSED_HZ = 1.95


def leaf_preset(freq_hz: float, amplitude_m: float = 1e-3, **kw) -> OscillatorParams:
    return OscillatorParams.from_frequency(freq_hz, amplitude_m, **kw)


def watered_leaf(amplitude_m: float = 1e-3, **kw) -> OscillatorParams:
    return leaf_preset(WATERED_HZ, amplitude_m, **kw)


def stressed_leaf(amplitude_m: float = 1e-3, **kw) -> OscillatorParams:
    return leaf_preset(STRESSED_HZ, amplitude_m, **kw)
