"""Command-line entry point: ``leafvib <subcommand> ...``.

Errors end the process with a non-zero status and one line on stderr of the
form ``error: <category>: <message>``.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

from . import bss, capture, dsp, harness, pipeline, spectral
from .config import ConfigError
from .mechanics import OverdampedError
from .simulator import synthesize_cube

log = logging.getLogger("leafvib")

# category -> exit status
EXIT_CODES = {
    "usage": 2,
    "config": 3,
    "capture": 4,
    "range-selection": 5,
    "degenerate-fit": 6,
    "no-vibration": 7,
    "rank-deficient": 8,
    "io": 9,
    "invalid-input": 10,
}


def _category(exc: BaseException) -> str:
    for cls, name in ((ConfigError, "config"), (capture.CaptureError, "capture"),
                      (dsp.RangeSelectionError, "range-selection"),
                      (dsp.DegenerateFitError, "degenerate-fit"),
                      (spectral.NoVibrationError, "no-vibration"),
                      (bss.RankDeficientError, "rank-deficient"),
                      (OverdampedError, "config"), (OSError, "io")):
        if isinstance(exc, cls):
            return name
    return "invalid-input"


def _band(text: str):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("band must be 'lo,hi' in Hz")
    return lo, hi


def _floats(text: str):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected a comma-separated list of numbers")


def _write(outdir: Path, name: str, text: str) -> Path:
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / name
    path.write_text(text)
    log.info("wrote %s", path)
    return path


def _noise(args):
    return harness.standard_noise(snr_db=args.snr, jitter_std_rad=args.jitter)


def cmd_simulate(args):
    if args.scene:
        scene, cfg, noise = capture.load_scene(args.scene)
    else:
        cfg = harness.grid_config()
        scene = harness.single_leaf_scene(args.freq, args.seed)
        noise = _noise(args)
    cube = synthesize_cube(scene, cfg, noise, seed=args.seed, quantize=True)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = capture.write_raw(cube, out / "capture.bin")
    capture.save_scene(out / "scene.txt", scene, cfg, noise)
    log.info("wrote %d bytes", n)


def cmd_analyze(args):
    _, cfg, _ = capture.load_scene(args.scene)
    cube = capture.read_raw(args.input, cfg)
    pcfg = pipeline.PipelineConfig(variant=args.variant, seed=args.seed,
                                   **({"band_hz": args.band} if args.band else {}))
    trace = pipeline.PipelineTrace()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        est = pipeline.run_pipeline(cube, pcfg, trace)
    out = Path(args.output_dir)
    _write(out, "estimates.csv", harness.estimates_csv(est))
    if trace.series:
        _write(out, "spectrum.csv", harness.spectrum_csv(spectral.psd(trace.series[0], cfg.frame_rate_hz)))
    if not est:
        raise spectral.NoVibrationError("no vibration detected")


def cmd_evaluate(args):
    trials = harness.run_grid(args.freqs, range(args.seeds), _noise(args), (args.variant,),
                              band_hz=args.band)
    rep = harness.evaluate_mae([(t.freq_truth, t.estimates[args.variant]) for t in trials], args.variant)
    _write(Path(args.output_dir), "mae.csv", rep.to_csv())


def cmd_ablate(args):
    trials = harness.run_grid(args.freqs, range(args.seeds), _noise(args), two_leaf=args.two_leaf,
                              band_hz=args.band)
    _write(Path(args.output_dir), "ablation.csv", harness.ablation_report(trials).to_csv())


def cmd_sweep(args):
    noise = harness.standard_noise(args.snr, args.jitter, flutter_rms_m=harness.SWEEP_FLUTTER_RMS_M)
    rows = harness.sweep_chirp_repetition(args.times, range(args.seeds), noise=noise)
    _write(Path(args.output_dir), "chirp_sweep.csv", harness.sweep_csv(rows))


def cmd_diurnal(args):
    gen = harness.DroughtGenerator()
    series, _ = harness.simulate_drought(args.days, args.every, gen, seed=args.seed,
                                         noise=_noise(args), variant=args.variant)
    _write(Path(args.output_dir), "diurnal.csv", harness.diurnal_csv(harness.diurnal_delta(series), gen))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="leafvib", description="Leaf vibration sensing with FMCW radar.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, variant=True):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--snr", type=float, default=20.0, help="SNR in dB (default 20)")
        sp.add_argument("--jitter", type=float, default=0.3, help="per-chirp phase jitter std, rad")
        sp.add_argument("--band", type=_band, default=None, help="search band 'lo,hi' in Hz")
        sp.add_argument("-o", "--output-dir", default="out")
        if variant:
            sp.add_argument("--variant", choices=pipeline.VARIANTS, default="full")

    sp = sub.add_parser("simulate", help="scene -> raw binary capture")
    common(sp, variant=False)
    sp.add_argument("--scene", help="scene text file (default: standard single-leaf scene)")
    sp.add_argument("--freq", type=float, default=2.03, help="leaf frequency without --scene")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("analyze", help="raw binary -> estimates CSV")
    common(sp)
    sp.add_argument("input")
    sp.add_argument("--scene", required=True, help="scene text file holding the chirp config")
    sp.set_defaults(func=cmd_analyze)

    for name, func, help_ in (("evaluate", cmd_evaluate, "single-leaf grid -> MAE CSV"),
                              ("ablate", cmd_ablate, "variant ladder -> MAE CSV")):
        sp = sub.add_parser(name, help=help_)
        common(sp, variant=name == "evaluate")
        sp.add_argument("--seeds", type=int, default=20)
        sp.add_argument("--freqs", type=_floats, default=list(harness.GRID_FREQS_HZ))
        if name == "ablate":
            sp.add_argument("--two-leaf", action="store_true")
        sp.set_defaults(func=func)

    sp = sub.add_parser("sweep-chirp", help="chirp repetition sweep -> CSV")
    common(sp, variant=False)
    sp.add_argument("--seeds", type=int, default=20)
    sp.add_argument("--times", type=_floats, default=[50, 100, 200, 400, 800, 1600, 3200],
                    help="repetition times in microseconds")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("diurnal", help="synthetic drought -> per-day delta CSV")
    common(sp)
    sp.add_argument("--days", type=int, default=8)
    sp.add_argument("--every", type=float, default=2.0, help="hours between measurements")
    sp.set_defaults(func=cmd_diurnal)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code not in (0, None):
            print("error: usage: invalid arguments", file=sys.stderr)
            return EXIT_CODES["usage"]
        return 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except Exception as exc:  # noqa: BLE001 - every failure maps to a category
        cat = _category(exc)
        print(f"error: {cat}: {exc}", file=sys.stderr)
        return EXIT_CODES[cat]
    return 0


if __name__ == "__main__":
    sys.exit(main())
