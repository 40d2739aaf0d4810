"""Raw ADC capture files and scene/chirp config files.

Raw layout: headerless little-endian int16, I then Q per complex sample,
antenna index fastest, then ADC sample, then chirp, then frame.  Four bytes
per complex sample.

Scene files are flat ``key = value`` text.  ``[chirp]``, ``[noise]`` and
``[scene]`` hold singletons; each ``[scatterer]`` header opens a new
scatterer block.  All quantities are SI.  ``#`` starts a comment.
"""

from __future__ import annotations

import os
from dataclasses import fields

import numpy as np

from .config import ChirpConfig
from .mechanics import DEFAULT_DAMPING_RATIO, OscillatorParams
from .simulator import IqCube, NoiseSpec, SceneSpec, Scatterer, quantize_cube


class CaptureError(ValueError):
    """Malformed or inconsistent raw capture."""


def _is_adc_codes(d: np.ndarray) -> bool:
    for part in (d.real, d.imag):
        if np.any(part != np.round(part)) or np.any(np.abs(part) > 32767):
            return False
    return True


def write_raw(cube: IqCube, path) -> int:
    """Write ``cube`` as int16 I/Q; returns the byte count.

    A cube that is not already integral int16 codes is quantized first (see
    :func:`~leafvib.simulator.quantize_cube`), so only ADC-code cubes round
    trip exactly.
    """
    d = cube.data
    if not np.all(np.isfinite(d)):
        raise CaptureError("cube contains non-finite samples")
    if not _is_adc_codes(d):
        d = quantize_cube(cube).data
    iq = np.empty(d.shape + (2,), dtype="<i2")
    iq[..., 0] = d.real
    iq[..., 1] = d.imag
    raw = iq.tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(raw)
    return len(raw)


def read_raw(path, cfg: ChirpConfig, dtype=np.complex64) -> IqCube:
    size = os.path.getsize(path)
    per_frame = cfg.chirps_per_frame * cfg.adc_samples * cfg.num_virtual * 4
    if size == 0:
        raise CaptureError("empty capture file")
    if size % per_frame:
        raise CaptureError(f"file size {size} is not a whole number of frames "
                           f"({per_frame} bytes each) for this config; "
                           "dimension mismatch or truncated file")
    iq = np.fromfile(path, dtype="<i2").reshape(
        -1, cfg.chirps_per_frame, cfg.adc_samples, cfg.num_virtual, 2)
    data = (iq[..., 0] + 1j * iq[..., 1]).astype(dtype)
    return IqCube(data, cfg)


# --- scene config text ------------------------------------------------------

_NOISE_KEYS = {f.name for f in fields(NoiseSpec)}
_CHIRP_KEYS = {f.name for f in fields(ChirpConfig)}


def _parse_value(text: str):
    text = text.strip()
    if text.lower() in ("none", ""):
        return None
    if "," in text:
        return [float(v) for v in text.split(",") if v.strip()]
    try:
        if text.lstrip("-").isdigit():
            return int(text)
        return float(text)
    except ValueError:
        return text


def _scatterer_from(block: dict) -> Scatterer:
    motion = None
    if "frequency_hz" in block:
        motion = OscillatorParams.from_frequency(
            float(block["frequency_hz"]), float(block.get("amplitude_m", 1e-3)),
            damping_ratio=float(block.get("damping_ratio", DEFAULT_DAMPING_RATIO)),
            onset_time_s=float(block.get("onset_time_s", 0.0)))
    elif "stiffness" in block:
        motion = OscillatorParams(
            mass_kg=float(block["mass_kg"]), damping_coeff=float(block["damping_coeff"]),
            stiffness=float(block["stiffness"]),
            forcing_amplitude=float(block["forcing_amplitude"]),
            onset_time_s=float(block.get("onset_time_s", 0.0)))
    gains = block.get("antenna_gains")
    if isinstance(gains, (int, float)):
        gains = [float(gains)]
    return Scatterer(range_m=float(block["range_m"]), rcs_gain=float(block.get("rcs_gain", 1.0)),
                     motion=motion, antenna_gains=None if gains is None else np.asarray(gains),
                     group=None if block.get("group") is None else str(block["group"]))


def parse_scene_text(text: str):
    """Parse scene text into ``(SceneSpec, ChirpConfig, NoiseSpec)``."""
    sections: list[tuple[str, dict]] = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = (line[1:-1].strip().lower(), {})
            sections.append(current)
            continue
        if "=" not in line or current is None:
            raise ValueError(f"line {lineno}: expected 'key = value' inside a section")
        key, value = line.split("=", 1)
        current[1][key.strip()] = _parse_value(value)

    chirp_kw, noise_kw, scene_kw, scatterers = {}, {}, {}, []
    for name, kv in sections:
        if name == "chirp":
            unknown = set(kv) - _CHIRP_KEYS
            if unknown:
                raise ValueError(f"unknown chirp keys: {sorted(unknown)}")
            chirp_kw.update(kv)
        elif name == "noise":
            unknown = set(kv) - _NOISE_KEYS
            if unknown:
                raise ValueError(f"unknown noise keys: {sorted(unknown)}")
            if "flutter_band_hz" in kv:
                kv["flutter_band_hz"] = tuple(kv["flutter_band_hz"])
            noise_kw.update(kv)
        elif name == "scene":
            scene_kw.update(kv)
        elif name == "scatterer":
            scatterers.append(_scatterer_from(kv))
        else:
            raise ValueError(f"unknown section [{name}]")
    cfg = ChirpConfig(**chirp_kw)
    scene = SceneSpec(scatterers, duration_s=float(scene_kw.get("duration_s", 6.0)))
    return scene, cfg, NoiseSpec(**noise_kw)


def load_scene(path):
    with open(path) as fh:
        return parse_scene_text(fh.read())


def _fmt(v) -> str:
    if isinstance(v, (list, tuple, np.ndarray)):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_scene(scene: SceneSpec, cfg: ChirpConfig, noise: NoiseSpec | None = None) -> str:
    lines = ["# leafvib scene v1 -- SI units (m, s, Hz, rad, kg, N/m)", "[chirp]"]
    for f in fields(ChirpConfig):
        v = getattr(cfg, f.name)
        if v is not None:
            lines.append(f"{f.name} = {_fmt(v)}")
    if noise is not None:
        lines.append("[noise]")
        for f in fields(NoiseSpec):
            v = getattr(noise, f.name)
            if v is not None:
                lines.append(f"{f.name} = {_fmt(v)}")
    lines += ["[scene]", f"duration_s = {_fmt(float(scene.duration_s))}"]
    for s in scene.scatterers:
        lines += ["[scatterer]", f"range_m = {_fmt(float(s.range_m))}",
                  f"rcs_gain = {_fmt(float(s.rcs_gain))}"]
        if s.motion is not None:
            m = s.motion
            lines += [f"mass_kg = {_fmt(m.mass_kg)}", f"damping_coeff = {_fmt(m.damping_coeff)}",
                      f"stiffness = {_fmt(m.stiffness)}",
                      f"forcing_amplitude = {_fmt(m.forcing_amplitude)}",
                      f"onset_time_s = {_fmt(m.onset_time_s)}"]
        if s.antenna_gains is not None:
            lines.append(f"antenna_gains = {_fmt(s.antenna_gains)}")
        if s.group is not None:
            lines.append(f"group = {s.group}")
    return "\n".join(lines) + "\n"


def save_scene(path, scene: SceneSpec, cfg: ChirpConfig, noise: NoiseSpec | None = None) -> None:
    with open(path, "w") as fh:
        fh.write(format_scene(scene, cfg, noise))
