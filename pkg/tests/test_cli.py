import json
import shutil

import numpy as np
import pytest

from conftest import DATA
from ductwarp import wkb
from ductwarp.cli import main
from ductwarp.env import LinearDuct
from ductwarp.fileio import read_dispersion_csv, read_waveform, sha256_file

ICE = str(DATA / "central_ice.csv")

SMALL_SCENARIO = """\
[environment]
ssp = ice.csv          # copied next to this file
[geometry]
source_depth = 60
receiver_depth = 60
range = 50000
[pulse]
f_lo = 10
f_hi = 50
taper = 0.5            # wide edges keep the pulse tail clear of t_r
[solver]
max_modes = 2
[synthesis]
sample_rate = 200
duration = 2
[warp]
t_r = nominal
modes = 1, 2
[stft]
window_len = 128
hop = 8
[outputs]
directory = out
"""


def run_cli(*argv):
    return main([str(a) for a in argv])


def read_manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_fit_duct(tmp_path, capsys):
    assert run_cli("fit-duct", "--ssp", ICE, "--depth-limit", 400, "--out", tmp_path) == 0
    printed = capsys.readouterr().out
    assert printed.startswith("c0 = 143")
    header, row = (tmp_path / "duct.csv").read_text().splitlines()
    assert header == "c0,a,duct_depth"
    c0, a, depth = map(float, row.split(","))
    assert c0 == pytest.approx(1434.0, rel=1e-12)
    assert depth == 400.0
    assert a == pytest.approx(25 / (1434 * 400), rel=1e-12)


def test_manifest_lists_inputs_and_outputs(tmp_path):
    assert run_cli("modes", "--ssp", ICE, "--freq", 50, "--max-modes", 4, "--out", tmp_path) == 0
    man = read_manifest(tmp_path)
    assert man["command"] == "modes"
    assert man["inputs"] == {ICE: sha256_file(ICE)}
    assert man["parameters"]["freq"] == 50.0
    assert set(man["outputs"]) == {"modes.csv", "eigenfunctions.csv"}
    for name, digest in man["outputs"].items():
        assert sha256_file(tmp_path / name) == digest
    assert len((tmp_path / "modes.csv").read_text().splitlines()) == 5


def test_wkb_table(tmp_path, capsys):
    args = ["wkb-table", "--c0", 1434, "--a", 4.359e-5, "--freq", 100, "--ssp", ICE,
            "--out", tmp_path]
    assert run_cli(*args) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "m,k_exact_form,k_linearized,k_solver,rel_gap"
    rows = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    assert rows[:, 0].tolist() == list(range(1, 8))
    assert np.all(rows[:, 4] <= 5e-4)
    duct = LinearDuct(1434, 4.359e-5, 400)
    assert rows[0, 1] == float(wkb.k_exact_form(duct, 1, 2 * np.pi * 100))


def test_tl(tmp_path):
    assert run_cli("tl", "--ssp", ICE, "--freq", 50, "--zs", 60, "--ranges", "1000:3000:1000",
                   "--depths", "10,60,200", "--out", tmp_path) == 0
    lines = (tmp_path / "tl.csv").read_text().splitlines()
    assert len(lines) == 4
    assert lines[0].split(",")[1:] == ["1000.0", "2000.0", "3000.0"]
    tl = np.array([[float(v) for v in ln.split(",")[1:]] for ln in lines[1:]])
    assert np.all(np.isfinite(tl)) and np.all(tl > 0)


def test_synth_warp_separate_dispersion(tmp_path):
    synth = tmp_path / "synth"
    assert run_cli("synth", "--ssp", ICE, "--zs", 60, "--zr", 60, "--range", 50e3,
                   "--f-lo", 10, "--f-hi", 50, "--taper", 0.5, "--fs", 200, "--duration", 2,
                   "--max-modes", 2, "--out", synth) == 0
    wave = synth / "waveform.f32"
    w = read_waveform(wave)
    assert (w.sample_rate, len(w)) == (200.0, 400)

    assert run_cli("warp", "--waveform", wave, "--range", 50e3, "--out", tmp_path / "warp") == 0
    assert read_manifest(tmp_path / "warp")["parameters"]["t_r"] == pytest.approx(50e3 / 1434)
    spec = (tmp_path / "warp" / "warped_spectrum.csv").read_text().splitlines()
    assert spec[0] == "f_hz,esd"

    sep = tmp_path / "sep"
    assert run_cli("separate", "--waveform", wave, "--range", 50e3, "--c0", 1434,
                   "--a", 4.359e-5, "--modes", "1,2", "--window", 128, "--hop", 8,
                   "--out", sep) == 0
    rows = read_dispersion_csv((sep / "dispersion.csv").read_text())
    assert set(rows[:, 0]) == {1.0, 2.0}
    assert (sep / "mode_1.f32").is_file() and (sep / "mode_2.f32.json").is_file()

    disp = tmp_path / "disp"
    assert run_cli("dispersion", "--c0", 1434, "--a", 4.359e-5, "--range", 50e3,
                   "--waveform", wave, "--window", 128, "--hop", 8, "--out", disp) == 0
    assert set(read_manifest(disp)["outputs"]) == {
        "skeleton.csv", "spectrogram.csv", "spectrogram.pgm", "ridge.csv"}
    assert (disp / "spectrogram.pgm").read_bytes().startswith(b"P5\n")


@pytest.mark.parametrize("argv", [
    ["modes", "--ssp", ICE, "--freq", 50, "--bogus"],
    ["modes", "--ssp", "/nonexistent/profile.csv", "--freq", 50],
    ["tl", "--ssp", ICE, "--freq", 50, "--zs", 60, "--ranges", "5:1:1", "--depths", "10"],
    ["scenario", "run", "/nonexistent.cfg"],
    [],
])
def test_input_errors_exit_1(tmp_path, argv, capsys):
    assert run_cli(*argv, *(["--out", tmp_path] if argv[:1] in (["modes"], ["tl"]) else [])) == 1
    assert "error" in capsys.readouterr().err


def test_numerical_failure_exits_2(tmp_path, capsys):
    code = run_cli("modes", "--ssp", ICE, "--freq", 3, "--max-phase-speed", 1434.5,
                   "--out", tmp_path)
    assert code == 2
    assert "numerical failure" in capsys.readouterr().err


@pytest.fixture
def small_scenario(tmp_path):
    shutil.copy(DATA / "central_ice.csv", tmp_path / "ice.csv")
    cfg = tmp_path / "small.cfg"
    cfg.write_text(SMALL_SCENARIO)
    return cfg


def test_scenario_is_reproducible(small_scenario, capsys):
    base = small_scenario.parent
    assert run_cli("scenario", "run", small_scenario) == 0
    assert "modes present: [1, 2]" in capsys.readouterr().out
    assert run_cli("scenario", "run", small_scenario, "--out", base / "again") == 0
    first = sorted(p.name for p in (base / "out").iterdir())
    assert first == sorted(p.name for p in (base / "again").iterdir())
    for name in first:
        assert (base / "out" / name).read_bytes() == (base / "again" / name).read_bytes()
    man = read_manifest(base / "out")
    assert set(man["inputs"]) == {str(small_scenario), str(base / "ice.csv")}
    assert man["parameters"]["geometry"]["range"] == "50000"


def test_scenario_errors(small_scenario):
    text = SMALL_SCENARIO.replace("t_r = nominal", "t_r = soon")
    small_scenario.write_text(text)
    assert run_cli("scenario", "run", small_scenario) == 1
    small_scenario.write_text(SMALL_SCENARIO.replace("range = 50000\n", ""))
    assert run_cli("scenario", "run", small_scenario) == 1
    small_scenario.write_text(SMALL_SCENARIO + "artifacts = waveform, movie\n")
    assert run_cli("scenario", "run", small_scenario) == 1


def test_shipped_scenario_finds_three_modes(tmp_path, capsys):
    out = tmp_path / "run"
    assert run_cli("scenario", "run", DATA / "arctic_105km.cfg", "--out", out) == 0
    assert "modes present: [1, 2, 3]" in capsys.readouterr().out
    rows = read_dispersion_csv((out / "dispersion.csv").read_text())
    assert set(rows[:, 0]) == {1.0, 2.0, 3.0}
    for m in (1, 2, 3):
        assert read_waveform(out / f"mode_{m}.f32").sample_rate == 400.0
