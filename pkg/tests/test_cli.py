import numpy as np
import pytest

from leafvib import capture, harness
from leafvib.cli import EXIT_CODES, main
from leafvib.simulator import SceneSpec, Scatterer


def run(argv, capsys):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr().err


def test_simulate_then_analyze(tmp_path, capsys):
    sim = tmp_path / "sim"
    code, _ = run(["simulate", "--freq", "2.03", "--seed", "4", "-o", sim], capsys)
    assert code == 0
    cfg = harness.grid_config()
    n = (sim / "capture.bin").stat().st_size
    assert n == 750 * cfg.chirps_per_frame * cfg.adc_samples * cfg.num_virtual * 4
    out = tmp_path / "ana"
    code, err = run(["analyze", sim / "capture.bin", "--scene", sim / "scene.txt", "--variant", "phasediff",
                     "-o", out], capsys)
    assert code == 0, err
    lines = (out / "estimates.csv").read_text().splitlines()
    assert lines[:2] == ["# leafvib-csv/1", "source_index,frequency_hz,amplitude_m,peak_snr_db"]
    assert float(lines[2].split(",")[1]) == pytest.approx(2.03, abs=0.05)
    spec = (out / "spectrum.csv").read_text().splitlines()
    assert spec[1] == "frequency_hz,magnitude"


def test_evaluate_is_byte_identical(tmp_path, capsys):
    args = ["evaluate", "--seeds", "1", "--freqs", "2.03,3.5", "--variant", "refine"]
    assert run(args + ["-o", tmp_path / "a"], capsys)[0] == 0
    assert run(args + ["-o", tmp_path / "b"], capsys)[0] == 0
    a = (tmp_path / "a" / "mae.csv").read_bytes()
    assert a == (tmp_path / "b" / "mae.csv").read_bytes()
    assert b"All,refine," in a


def test_diurnal_and_sweep_outputs(tmp_path, capsys):
    assert run(["diurnal", "--days", "1", "--every", "6", "-o", tmp_path], capsys)[0] == 0
    rows = (tmp_path / "diurnal.csv").read_text().splitlines()
    assert rows[1] == "day,day_median_hz,night_median_hz,delta_hz,generator_delta_hz"
    assert rows[2].startswith("0,")
    assert run(["sweep-chirp", "--seeds", "1", "--times", "50,400", "-o", tmp_path], capsys)[0] == 0
    assert len((tmp_path / "chirp_sweep.csv").read_text().splitlines()) == 4


def test_usage_error(capsys):
    code, err = run(["frobnicate"], capsys)
    assert code == EXIT_CODES["usage"] == 2
    assert err.strip().splitlines()[-1].startswith("error: usage:")


def test_missing_input_is_io_error(tmp_path, capsys):
    capture.save_scene(tmp_path / "s.txt", SceneSpec([]), harness.grid_config())
    code, err = run(["analyze", tmp_path / "nope.bin", "--scene", tmp_path / "s.txt", "-o", tmp_path], capsys)
    assert code == EXIT_CODES["io"]
    assert err.startswith("error: io:")


def test_dimension_mismatch_is_capture_error(tmp_path, capsys):
    sim = tmp_path / "sim"
    assert run(["simulate", "-o", sim], capsys)[0] == 0
    text = (sim / "scene.txt").read_text().replace("adc_samples = 32", "adc_samples = 36")
    (sim / "bad.txt").write_text(text)
    code, err = run(["analyze", sim / "capture.bin", "--scene", sim / "bad.txt", "-o", tmp_path], capsys)
    assert code == EXIT_CODES["capture"], err
    assert "dimension mismatch" in err


def test_static_scene_is_no_vibration(tmp_path, capsys):
    capture.save_scene(tmp_path / "s.txt", SceneSpec([Scatterer(0.5, 1.0)]), harness.grid_config(),
                       harness.standard_noise(30, 0.0))
    assert run(["simulate", "--scene", tmp_path / "s.txt", "-o", tmp_path], capsys)[0] == 0
    code, err = run(["analyze", tmp_path / "capture.bin", "--scene", tmp_path / "s.txt", "-o", tmp_path], capsys)
    assert code == EXIT_CODES["no-vibration"]
    assert err.startswith("error: no-vibration:")


def test_bad_timing_is_config_error(tmp_path, capsys):
    (tmp_path / "s.txt").write_text("[chirp]\nchirps_per_frame = 512\n[scene]\nduration_s = 1.0\n")
    code, err = run(["simulate", "--scene", tmp_path / "s.txt", "-o", tmp_path], capsys)
    assert code == EXIT_CODES["config"]
    assert "overflows" in err


def test_exit_codes_are_distinct():
    assert len(set(EXIT_CODES.values())) == len(EXIT_CODES)
    assert 0 not in EXIT_CODES.values()
    assert np.all(np.array(list(EXIT_CODES.values())) > 1)
