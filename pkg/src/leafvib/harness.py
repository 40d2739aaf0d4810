"""Scene grids, error accounting and the experiment drivers behind the CLI.

Everything here is deterministic for a given seed: scenes draw their random
parts (antenna gains, onsets) from ``default_rng(seed)`` and the simulator
gets the same seed.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import pipeline
from .config import ChirpConfig, compact_config
from .mechanics import OscillatorParams, natural_frequency_hz
from .simulator import NoiseSpec, Scatterer, SceneSpec, synthesize_cube
from .spectral import VibrationEstimate

log = logging.getLogger(__name__)

CSV_SCHEMA = "leafvib-csv/1"
BANDS = (("1-2", 1.0, 2.0), ("2-3", 2.0, 3.0), ("3-4", 3.0, 4.0), ("4-5", 4.0, 5.0))
GRID_FREQS_HZ = (1.2, 2.03, 2.78, 3.5, 4.25)
TWO_LEAF_HZ = (2.78, 4.25)
LEAF_RANGE_M = 0.5
SWEEP_FLUTTER_RMS_M = 100e-6

# Leaf reflectivity per grid frequency: smaller leaves vibrate faster and
# reflect less, with the 3-4 Hz leaf the weakest of the set.
GRID_RCS = {1.2: 1.0, 2.03: 1.0, 2.78: 0.8, 3.5: 0.3, 4.25: 0.7}


# --- scenes -----------------------------------------------------------------

def grid_config() -> ChirpConfig:
    """Reduced-size capture used by the evaluation grids (6 s at 125 Hz)."""
    return compact_config(chirps=16, samples=32)


def standard_noise(snr_db: float | None = 20.0, jitter_std_rad: float = 0.3, **kw) -> NoiseSpec:
    return NoiseSpec(snr_db=snr_db, jitter_std_rad=jitter_std_rad, **kw)


def leaf_motion(freq_hz: float, *, swing_m_hz: float = 0.03, onset_s: float = 1.0,
                damping_ratio: float = 0.05) -> OscillatorParams:
    """Struck-leaf response with peak speed independent of frequency.

    The initial amplitude is ``swing_m_hz / freq_hz``; at 2 Hz that is 15 mm,
    several wavelengths of swing.
    """
    return OscillatorParams.from_frequency(freq_hz, swing_m_hz / freq_hz,
                                           damping_ratio=damping_ratio, onset_time_s=onset_s)


def single_leaf_scene(freq_hz: float, seed: int = 0, *, rcs: float | None = None,
                      clutter_rcs: float = 1.5, num_antennas: int = 12, **motion_kw) -> SceneSpec:
    """One vibrating leaf at 0.5 m sharing its bin with a static reflector, plus a wall."""
    rng = np.random.default_rng(seed)
    if rcs is None:
        rcs = GRID_RCS.get(freq_hz, 1.0)
    leaf = Scatterer(LEAF_RANGE_M, rcs, leaf_motion(freq_hz, **motion_kw),
                     antenna_gains=rng.uniform(0.5, 1.0, num_antennas))
    scatterers = [leaf, Scatterer(LEAF_RANGE_M, clutter_rcs)]
    if clutter_rcs <= 0:
        scatterers = [leaf]
    scatterers.append(Scatterer(1.56, 0.3))
    return SceneSpec(scatterers)


def two_leaf_scene(seed: int = 0, freqs_hz=TWO_LEAF_HZ, *, swing_m_hz=(0.03, 0.025),
                   clutter_rcs: float = 1.5, num_antennas: int = 12) -> SceneSpec:
    """Two leaves in one range bin, mixed through random full-rank antenna gains.

    The first leaf is the larger one (bigger swing and reflectivity).
    """
    rng = np.random.default_rng(seed)
    while True:
        G = rng.uniform(0.1, 1.0, (num_antennas, len(freqs_hz)))
        if np.linalg.matrix_rank(G) == len(freqs_hz) and np.linalg.cond(G) < 20:
            break
    leaves = [Scatterer(LEAF_RANGE_M, 1.0 if i == 0 else 0.6,
                        leaf_motion(f, swing_m_hz=swing_m_hz[i], onset_s=float(rng.uniform(0.8, 1.2))),
                        antenna_gains=G[:, i], group="leaves")
              for i, f in enumerate(freqs_hz)]
    scatterers = leaves + [Scatterer(LEAF_RANGE_M, clutter_rcs), Scatterer(1.56, 0.3)]
    return SceneSpec(scatterers)


# --- error accounting -------------------------------------------------------

def band_of(freq_hz: float) -> str | None:
    for name, lo, hi in BANDS:
        if lo <= freq_hz < hi or (name == BANDS[-1][0] and freq_hz == hi):
            return name
    return None


def match_estimates(truths, estimates, top_k: bool = True):
    """Greedy nearest-frequency assignment of estimates to truths.

    With ``top_k`` only the len(truths) strongest estimates take part (the
    pipeline returns them in decreasing amplitude), so spurious extra
    components cannot stand in for a missed source.  Returns a list of
    (truth, estimate-or-None) pairs in truth order.
    """
    truths = [float(t) for t in truths]
    est = [e.frequency_hz if isinstance(e, VibrationEstimate) else float(e) for e in estimates]
    if top_k:
        est = est[:len(truths)]
    pairs = sorted((abs(t - e), i, j) for i, t in enumerate(truths) for j, e in enumerate(est))
    used_t, used_e, out = set(), set(), {}
    for _, i, j in pairs:
        if i in used_t or j in used_e:
            continue
        used_t.add(i)
        used_e.add(j)
        out[i] = est[j]
    return [(t, out.get(i)) for i, t in enumerate(truths)]


@dataclass
class MaeRow:
    band: str
    variant: str
    mae_hz: float
    stderr_hz: float
    n_trials: int
    misses: int = 0


@dataclass
class MaeReport:
    rows: list[MaeRow] = field(default_factory=list)

    def get(self, band: str, variant: str) -> MaeRow:
        for r in self.rows:
            if r.band == band and r.variant == variant:
                return r
        raise KeyError((band, variant))

    def mae(self, band: str = "All", variant: str = "full") -> float:
        return self.get(band, variant).mae_hz

    def to_csv(self) -> str:
        return write_csv(["band", "variant", "mae_hz", "stderr_hz", "n_trials", "misses"],
                         [[r.band, r.variant, r.mae_hz, r.stderr_hz, r.n_trials, r.misses]
                          for r in self.rows])


def evaluate_mae(trials, variant: str = "full", *, top_k: bool = True) -> MaeReport:
    """Per-band MAE over ``trials``, each a (truth frequencies, estimates) pair.

    Errors are binned by the truth frequency.  Truths left without an
    estimate are misses: counted per band, excluded from the mean.
    """
    trials = list(trials)
    if not trials:
        raise ValueError("no trials to evaluate")
    errs = {name: [] for name, _, _ in BANDS}
    errs["All"] = []
    misses = dict.fromkeys(errs, 0)
    for truths, estimates in trials:
        for t, e in match_estimates(truths, estimates, top_k):
            b = band_of(t)
            keys = ["All"] + ([b] if b else [])
            for key in keys:
                if e is None:
                    misses[key] += 1
                else:
                    errs[key].append(abs(e - t))
    rows = []
    for key in [name for name, _, _ in BANDS] + ["All"]:
        v = np.asarray(errs[key])
        if v.size == 0 and misses[key] == 0:
            continue
        mae = float(v.mean()) if v.size else math.nan
        se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
        rows.append(MaeRow(key, variant, mae, se, int(v.size), misses[key]))
    return MaeReport(rows)


# --- experiment drivers -----------------------------------------------------

@dataclass
class Trial:
    freq_truth: list
    seed: int
    estimates: dict  # variant -> list[VibrationEstimate]
    traces: dict = field(default_factory=dict)


def run_trial(scene: SceneSpec, noise: NoiseSpec | None, seed: int, variants=pipeline.VARIANTS,
              cfg: ChirpConfig | None = None, pcfg: pipeline.PipelineConfig | None = None,
              keep_traces: bool = False) -> Trial:
    cfg = cfg or grid_config()
    cube = synthesize_cube(scene, cfg, noise, seed=seed)
    pcfg = pcfg or pipeline.PipelineConfig(seed=seed)
    traces = {} if keep_traces else None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        est = pipeline.run_variants(cube, variants, pcfg, traces)
    return Trial(scene.truth_frequencies(), seed, est, traces or {})


def run_grid(freqs=GRID_FREQS_HZ, seeds=range(20), noise: NoiseSpec | None = None,
             variants=pipeline.VARIANTS, two_leaf: bool = False, cfg: ChirpConfig | None = None,
             band_hz=None) -> list[Trial]:
    """Single-leaf trials for every (frequency, seed), or two-leaf trials per seed."""
    noise = standard_noise() if noise is None else noise
    trials = []
    for s in seeds:
        pcfg = pipeline.PipelineConfig(seed=s, **({"band_hz": band_hz} if band_hz else {}))
        if two_leaf:
            trials.append(run_trial(two_leaf_scene(s), noise, s, variants, cfg, pcfg))
            continue
        for f in freqs:
            scene_seed = 1000 * s + int(round(f * 100))
            trials.append(run_trial(single_leaf_scene(f, scene_seed), noise, s, variants, cfg, pcfg))
    return trials


def ablation_report(trials: list[Trial], variants=pipeline.VARIANTS) -> MaeReport:
    rows = []
    for v in variants:
        rows.extend(evaluate_mae([(t.freq_truth, t.estimates[v]) for t in trials], v).rows)
    return MaeReport(rows)


@dataclass
class SweepRow:
    repetition_us: float
    median_iqr_rad: float
    mae_hz: float
    misses: int


def sweep_chirp_repetition(times_us=(50, 100, 200, 400, 800, 1600, 3200), seeds=range(20),
                           freq_hz: float = 2.03, chirps: int = 8, noise: NoiseSpec | None = None,
                           variant: str = "phasediff", stretch_frame: bool = True) -> list[SweepRow]:
    """IQR width of the chirp differences and MAE as the chirp spacing grows.

    The scene and noise are held fixed; the frame period grows to fit the
    burst when ``chirps`` x spacing exceeds it (otherwise the config
    rejects the timing).  IQR width is the per-frame Q3 - Q1 of the
    chirp-to-chirp differences on the reference antenna, median over frames
    and seeds.
    """
    base = compact_config(chirps=chirps, samples=32)
    noise = noise if noise is not None else standard_noise(flutter_rms_m=SWEEP_FLUTTER_RMS_M)
    rows = []
    for us in times_us:
        cfg = base.with_chirp_repetition(us * 1e-6, stretch_frame=stretch_frame)
        iqr, trials = [], []
        for s in seeds:
            tr = run_trial(single_leaf_scene(freq_hz, 1000 * s + 7), noise, s, (variant,), cfg,
                           keep_traces=True)
            coh = tr.traces[variant].coherent
            if coh:
                iqr.append(np.median(coh[0].iqr_width))
            trials.append((tr.freq_truth, tr.estimates[variant]))
        rep = evaluate_mae(trials, variant)
        rows.append(SweepRow(float(us), float(np.median(iqr)) if iqr else math.nan,
                             rep.mae("All", variant), rep.get("All", variant).misses))
    return rows


def sweep_csv(rows: list[SweepRow]) -> str:
    return write_csv(["repetition_us", "median_iqr_rad", "mae_hz", "misses"],
                     [[r.repetition_us, r.median_iqr_rad, r.mae_hz, r.misses] for r in rows])


# --- diurnal / drought ------------------------------------------------------

# Stiffness of a drying leaf over 11 days (day, N/m).
STIFFNESS_POINTS = ((0, 1.7), (1, 1.6), (2, 1.6), (6, 1.3), (8, 1.2), (9, 1.1), (10, 1.0), (11, 1.0))


def stiffness_at(day) -> np.ndarray:
    d, k = np.array(STIFFNESS_POINTS, dtype=float).T
    return np.interp(day, d, k)


@dataclass
class DroughtGenerator:
    """Leaf frequency over a drought: slow stiffness loss plus a day/night step.

    ``base`` frequency follows sqrt(k(t)/m) with m set so day 0 is
    ``start_hz``.  During the day window the frequency sits ``delta/2``
    above the base, at night ``delta/2`` below, where delta decays
    geometrically from ``delta0_hz`` to ``delta_end_hz`` at ``end_day``.
    """
    start_hz: float = 2.03
    delta0_hz: float = 0.1
    delta_end_hz: float = 0.012
    end_day: int = 7
    day_start_h: float = 6.0
    day_end_h: float = 18.0

    @property
    def mass_kg(self) -> float:
        return float(stiffness_at(0.0)) / (2 * math.pi * self.start_hz) ** 2

    def delta(self, day) -> np.ndarray:
        r = (self.delta_end_hz / self.delta0_hz) ** (1.0 / self.end_day)
        return self.delta0_hz * r ** np.asarray(day, dtype=float)

    def frequency(self, hours) -> np.ndarray:
        h = np.asarray(hours, dtype=float)
        day = np.floor(h / 24.0)
        base = np.vectorize(natural_frequency_hz)(stiffness_at(h / 24.0), self.mass_kg)
        is_day = _is_day(h, self.day_start_h, self.day_end_h)
        return base + np.where(is_day, 0.5, -0.5) * self.delta(day)


def _is_day(hours, start_h, end_h) -> np.ndarray:
    hod = np.mod(np.asarray(hours, dtype=float), 24.0)
    return (hod >= start_h) & (hod < end_h)


@dataclass
class DiurnalSeries:
    timestamps_h: np.ndarray
    frequency_hz: np.ndarray
    day_start_h: float = 6.0
    day_end_h: float = 18.0

    @property
    def is_day(self) -> np.ndarray:
        return _is_day(self.timestamps_h, self.day_start_h, self.day_end_h)


@dataclass
class DayDelta:
    day: int
    day_median_hz: float
    night_median_hz: float
    delta_hz: float


def diurnal_delta(series: DiurnalSeries) -> list[DayDelta]:
    """Median daytime frequency minus median night-time frequency, per day.

    Days lacking either day or night measurements are skipped with a warning.
    """
    t = np.asarray(series.timestamps_h, dtype=float)
    f = np.asarray(series.frequency_hz, dtype=float)
    if t.shape != f.shape or t.size == 0:
        raise ValueError("timestamps and frequencies must be non-empty and the same length")
    days = np.floor(t / 24.0).astype(int)
    is_day = series.is_day
    out = []
    for d in np.unique(days):
        sel = days == d
        dv, nv = f[sel & is_day], f[sel & ~is_day]
        if dv.size == 0 or nv.size == 0:
            warnings.warn(f"day {d} lacks {'day' if dv.size == 0 else 'night'} measurements; skipped",
                          RuntimeWarning)
            continue
        dm, nm = float(np.median(dv)), float(np.median(nv))
        out.append(DayDelta(int(d), dm, nm, dm - nm))
    return out


def simulate_drought(days: int = 8, every_h: float = 2.0, gen: DroughtGenerator | None = None,
                     seed: int = 0, noise: NoiseSpec | None = None, variant: str = "phasediff",
                     cfg: ChirpConfig | None = None):
    """Measure the generator's leaf every ``every_h`` hours through the pipeline.

    Returns (DiurnalSeries of estimates, generator truth per sample).  A
    measurement with no estimate is dropped.
    """
    gen = gen or DroughtGenerator()
    hours = np.arange(0.0, days * 24.0, every_h)
    truth = gen.frequency(hours)
    noise = standard_noise() if noise is None else noise
    ts, est = [], []
    for i, (h, f) in enumerate(zip(hours, truth)):
        s = seed * 100003 + i
        tr = run_trial(single_leaf_scene(float(f), s, rcs=1.0), noise, s, (variant,), cfg)
        e = tr.estimates[variant]
        if e:
            ts.append(h)
            est.append(e[0].frequency_hz)
    return DiurnalSeries(np.array(ts), np.array(est), gen.day_start_h, gen.day_end_h), truth


def diurnal_csv(deltas: list[DayDelta], truth=None) -> str:
    header = ["day", "day_median_hz", "night_median_hz", "delta_hz"]
    rows = [[d.day, d.day_median_hz, d.night_median_hz, d.delta_hz] for d in deltas]
    if truth is not None:
        header.append("generator_delta_hz")
        for r, d in zip(rows, deltas):
            r.append(float(truth.delta(d.day)))
    return write_csv(header, rows)


# --- CSV --------------------------------------------------------------------

def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else f"{float(v):.6f}"
    return str(v)


def write_csv(header, rows, comment: str | None = None) -> str:
    """CSV text with a schema comment line; floats to 6 decimals."""
    buf = io.StringIO()
    buf.write(f"# {CSV_SCHEMA}" + (f" {comment}" if comment else "") + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def estimates_csv(estimates: list[VibrationEstimate]) -> str:
    return write_csv(["source_index", "frequency_hz", "amplitude_m", "peak_snr_db"],
                     [[e.source_index, e.frequency_hz, e.amplitude_m, e.peak_snr_db] for e in estimates])


def spectrum_csv(spec) -> str:
    """Plot data: frequency vs magnitude."""
    return write_csv(["frequency_hz", "magnitude"], zip(spec.freqs_hz, spec.magnitude))
