"""Leaf vibration frequency from FMCW radar captures.

Stages: range FFT and bin selection, circle-fit phase refinement, chirp-to-chirp
phase differencing with interquartile-mean reduction, FastICA across virtual
antennas, and a padded-FFT frequency estimator.  A synthetic capture
generator and experiment harness sit alongside.
"""

from .config import ChirpConfig, ConfigError, compact_config
from .mechanics import OscillatorParams
from .pipeline import VARIANTS, PipelineConfig, run_pipeline
from .simulator import IqCube, NoiseSpec, Scatterer, SceneSpec, synthesize_cube
from .spectral import NoVibrationError, VibrationEstimate, estimate_frequency

__version__ = "0.1.0"

__all__ = [
    "ChirpConfig", "ConfigError", "compact_config", "OscillatorParams",
    "VARIANTS", "PipelineConfig", "run_pipeline",
    "IqCube", "NoiseSpec", "Scatterer", "SceneSpec", "synthesize_cube",
    "NoVibrationError", "VibrationEstimate", "estimate_frequency",
]
