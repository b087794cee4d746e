import numpy as np
import pytest

from conftest import BAND, DUCT, SEP_GEOMETRY, SYNTH_DURATION, SYNTH_FS, T_R, THREE_MODES
from ductwarp import wkb
from ductwarp.env import RangeDependentEnv, SoundSpeedProfile, parse_ssp
from ductwarp.errors import InputError, NoModesError
from ductwarp.modes import default_grid, solve_modes
from ductwarp.synth import (Geometry, ModeProvider, SolverConfig, SourcePulse, Waveform,
                            _adiabatic_spectrum, dft_frequencies, dispersion_skeleton,
                            energy_duration, spectrum_energy, spectrum_to_waveform,
                            synthesize_pressure_spectrum, synthesize_waveform, thread_count,
                            transmission_loss_map)
from ductwarp.warp import extract_dispersion, stft

CHEAP = SolverConfig(max_modes=2)
CHEAP_PULSE = SourcePulse(10.0, 50.0)


def test_source_pulse_shape():
    p = SourcePulse(10.0, 100.0)
    f = np.array([5.0, 10.0, 14.5, 19.0, 50.0, 91.0, 100.0, 101.0])
    s = p.spectrum(f)
    assert s[0] == 0 and s[-1] == 0
    assert s[1] == pytest.approx(0.0, abs=1e-15)
    assert s[2] == pytest.approx(0.5, abs=1e-12)
    assert s[3] == s[4] == 1.0
    assert s[5] == 1.0 and s[6] == pytest.approx(0.0, abs=1e-15)
    assert np.all(SourcePulse(10, 100, "flat-band").spectrum(f[1:-1]) == 1.0)
    with pytest.raises(InputError):
        SourcePulse(100, 10)
    with pytest.raises(InputError):
        SourcePulse(10, 100, "gaussian")


def test_cylindrical_spreading(central_ice):
    prov = ModeProvider(central_ice, CHEAP)
    amps = []
    for r in (10e3, 40e3, 160e3):
        P = synthesize_pressure_spectrum(prov, Geometry(60, 60, r), None, [50.0], modes=[1])
        amps.append(abs(P[0]))
    assert amps[1] / amps[0] == pytest.approx(0.5, rel=1e-12)
    assert amps[2] / amps[1] == pytest.approx(0.5, rel=1e-12)


def test_receiver_on_node_silences_mode():
    iso = SoundSpeedProfile([0, 1000], [1500, 1500])
    cfg = SolverConfig(depth_max=1000.0, max_phase_speed=np.inf, max_modes=3)
    prov = ModeProvider(iso, cfg)
    on = synthesize_pressure_spectrum(prov, Geometry(250, 500, 5e3), None, [40.0], modes=[2])
    off = synthesize_pressure_spectrum(prov, Geometry(250, 250, 5e3), None, [40.0], modes=[2])
    assert abs(on[0]) <= 1e-10 * abs(off[0])


def test_attenuation_adds_linear_loss(central_ice):
    ranges = np.array([5e3, 20e3])
    alpha = 1e-5
    base = transmission_loss_map(central_ice, 50.0, 60.0, ranges, [60.0], SolverConfig(max_modes=1))
    lossy = transmission_loss_map(central_ice, 50.0, 60.0, ranges, [60.0],
                                  SolverConfig(max_modes=1), alpha=alpha)
    extra = lossy.tl - base.tl
    assert extra[0] == pytest.approx(20 * np.log10(np.e) * alpha * ranges, rel=1e-10)


def test_tl_map_matches_mode_sum(central_ice):
    f, zs, zr, r = 50.0, 60.0, 100.0, 12e3
    tl = transmission_loss_map(central_ice, f, zs, [r], [zr])
    sol = solve_modes(central_ice, f, default_grid(central_ice, f))
    terms = sol.psi_at(zs) * sol.psi_at(zr) * np.exp(1j * sol.k * r) / np.sqrt(sol.k)
    p = abs(terms.sum()) / (sol.rho * np.sqrt(8 * np.pi * r))
    assert tl.tl[0, 0] == pytest.approx(-20 * np.log10(4 * np.pi * p), abs=1e-9)
    rows = tl.to_csv().splitlines()
    assert rows[0].split(",")[1:] == [repr(r)]
    assert rows[1].split(",")[0] == repr(zr)
    with pytest.raises(InputError):
        transmission_loss_map(central_ice, f, zs, [0.0], [zr])


def test_parseval():
    n, freqs = dft_frequencies(200.0, 2.0)
    rng = np.random.default_rng(1)
    P = rng.standard_normal(freqs.size) + 1j * rng.standard_normal(freqs.size)
    w = spectrum_to_waveform(P, 200.0, 12.3)
    assert len(w) == n
    assert w.energy() == pytest.approx(spectrum_energy(P, 2.0), rel=1e-9)


def test_spectrum_to_waveform_delay():
    # a pure delay exp(j w tau) with unit spectrum puts a band-limited impulse at tau
    n, freqs = dft_frequencies(400.0, 2.0)
    tau = 10.7
    P = np.exp(2j * np.pi * freqs * tau) * SourcePulse(10, 100).spectrum(freqs)
    w = spectrum_to_waveform(P, 400.0, 10.0)
    assert w.times[np.argmax(np.abs(w.samples))] == pytest.approx(tau, abs=1.0 / 400)


def test_linearity(single_mode_waveforms, duct_provider):
    total = synthesize_waveform(DUCT.to_profile(), SEP_GEOMETRY, BAND, SYNTH_FS, SYNTH_DURATION,
                                config=THREE_MODES, modes=[1, 2, 3], provider=duct_provider)
    summed = single_mode_waveforms[1] + single_mode_waveforms[2] + single_mode_waveforms[3]
    err = np.max(np.abs(total.samples - summed.samples)) / np.max(np.abs(total.samples))
    assert err <= 1e-9


def test_no_energy_after_arrival_time(single_mode_waveforms):
    window = 256 / SYNTH_FS
    for w in single_mode_waveforms.values():
        late = w.samples[w.times > T_R + 2 * window]
        assert np.sum(late**2) <= 1e-6 * np.sum(w.samples**2)


@pytest.mark.parametrize("refine", [False, True])
def test_spectrogram_ridge_tracks_group_delay(single_mode_waveforms, refine):
    for m, w in single_mode_waveforms.items():
        sg = stft(w, 256, 16)
        ridge = extract_dispersion(sg, 0.1, refine=refine)
        expect = wkb.modal_group_delay(DUCT, m, 2 * np.pi * ridge[:, 0], SEP_GEOMETRY.r)
        assert np.max(np.abs(ridge[:, 1] - expect)) <= sg.time_step


def test_synthesis_preconditions(central_ice):
    g = Geometry(60, 60, 10e3)
    with pytest.raises(InputError, match="aliasing"):
        synthesize_waveform(central_ice, g, CHEAP_PULSE, 150.0, 2.0, config=CHEAP)
    with pytest.raises(InputError, match="even"):
        synthesize_waveform(central_ice, g, CHEAP_PULSE, 200.0, 2.005, config=CHEAP)
    with pytest.raises(InputError):
        Geometry(0, 60, 10e3)
    low = SourcePulse(0.5, 1.0)
    with pytest.raises(NoModesError):
        synthesize_waveform(central_ice, g, low, 200.0, 2.0, config=CHEAP)


def test_waveform_container():
    a = Waveform(100.0, 1.0, [0.0, 1.0, 2.0, 3.0])
    assert a.duration == 0.04 and a.dt == 0.01
    assert (a + a).samples[3] == 6.0
    with pytest.raises(InputError):
        a + Waveform(100.0, 2.0, [0.0] * 4)
    with pytest.raises(InputError):
        Waveform(100.0, 0.0, [np.nan])


def test_energy_duration():
    x = np.zeros(1000)
    x[200:600] = 1.0
    assert energy_duration(Waveform(100.0, 0.0, x)) == pytest.approx(0.95 * 4.0, abs=0.02)
    assert energy_duration(Waveform(100.0, 0.0, np.zeros(10))) == 0.0


# -- dispersion skeleton ---------------------------------------------------------

def test_skeleton_curves():
    skel = dispersion_skeleton(DUCT, 105e3, range(1, 7), (10.0, 100.0))
    for m in range(1, 7):
        rows = skel[skel[:, 0] == m]
        assert rows.shape[0] > 0
        assert np.all(np.diff(rows[:, 2]) > 0)
        assert np.all(rows[:, 2] < T_R)
    t1 = skel[skel[:, 0] == 1][:, 2]
    t2 = skel[skel[:, 0] == 2][:, 2]
    assert np.all(t1 > t2)
    far = dispersion_skeleton(DUCT, 105e3, [1], (1e5, 1e6))
    assert T_R - far[-1, 2] < 1e-3
    assert dispersion_skeleton(DUCT, 105e3, [1], (50.0, 50.0)).shape == (0, 3)


def test_skeleton_excludes_cutoff():
    skel = dispersion_skeleton(DUCT, 105e3, [1], (0.01, 10.0), n_freqs=200)
    fc = wkb.cutoff_omega(DUCT, 1) / (2 * np.pi)
    assert skel[:, 1].min() > fc


# -- adiabatic ---------------------------------------------------------------------

def test_adiabatic_identical_stations(central_ice):
    g = Geometry(60, 60, 30e3)
    direct = synthesize_waveform(central_ice, g, CHEAP_PULSE, 200.0, 2.0, config=CHEAP)
    for interp in ("piecewise-constant", "linear-blend"):
        env = RangeDependentEnv(((0, central_ice), (12e3, central_ice), (30e3, central_ice)),
                                interpolation=interp)
        adiabatic = synthesize_waveform(env, g, CHEAP_PULSE, 200.0, 2.0, config=CHEAP)
        err = np.max(np.abs(adiabatic.samples - direct.samples)) / np.max(np.abs(direct.samples))
        assert err <= 1e-10


def test_adiabatic_phase_integral(central_ice):
    warm = parse_ssp("0,1440\n400,1461\n1660,1475\n", "warm")
    env = RangeDependentEnv(((0, central_ice), (10e3, warm), (25e3, warm)))
    g = Geometry(60, 60, 25e3)
    f = np.array([40.0])
    P, dropped = _adiabatic_spectrum(env, g, SourcePulse(10, 100, "flat-band"),
                                     f, CHEAP, None, 0.0)
    s0 = solve_modes(central_ice, 40.0, default_grid(central_ice, 40.0), max_modes=2)
    s1 = solve_modes(warm, 40.0, default_grid(warm, 40.0), max_modes=2)
    phase = 10e3 * s0.k + 15e3 * s1.k
    k_mean = phase / 25e3
    terms = s0.psi_at(60) * s1.psi_at(60) * np.exp(1j * phase) / np.sqrt(k_mean)
    expect = 1j * np.exp(-1j * np.pi / 4) / (1000 * np.sqrt(8 * np.pi * 25e3)) * terms.sum()
    assert P[0] == pytest.approx(expect, rel=1e-12)
    assert dropped[0] == 0


def test_threaded_prefetch_matches_serial(central_ice, monkeypatch):
    freqs = [30.0, 35.0, 40.0, 45.0]
    serial = ModeProvider(central_ice, CHEAP)
    serial.prefetch(freqs)
    monkeypatch.setenv("DUCTWARP_THREADS", "3")
    assert thread_count() == 3
    threaded = ModeProvider(central_ice, CHEAP)
    threaded.prefetch(freqs)
    for f in freqs:
        assert np.array_equal(serial(f).k, threaded(f).k)
    monkeypatch.setenv("DUCTWARP_THREADS", "zero")
    assert thread_count() == 1
