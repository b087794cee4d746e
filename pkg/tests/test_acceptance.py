"""Acceptance checks, one test per numbered criterion.

Each test carries a ``criterion`` marker so the terminal summary prints a
single pass/fail line per criterion. Wall-clock limits are measured inside the
test around the work they bound.
"""

import time

import numpy as np
import pytest
from scipy import signal

from conftest import BAND, DUCT, RANGE, SEP_GEOMETRY, SYNTH_DURATION, SYNTH_FS, T_R, THREE_MODES
from ductwarp import wkb
from ductwarp.env import RangeDependentEnv, SoundSpeedProfile
from ductwarp.modes import (DepthGrid, default_grid, mode_surface_concentration,
                            orthonormality_error, solve_modes)
from ductwarp.synth import (Geometry, ModeProvider, SolverConfig, SourcePulse, Waveform,
                            energy_duration, synthesize_waveform, transmission_loss_map)
from ductwarp.warp import (WarpPlan, correlation, mode_bands, separate_modes, unwarp_signal,
                           warp_signal, warped_spectrum)

criterion = pytest.mark.criterion


def _fresh_single_modes(provider):
    profile = DUCT.to_profile()
    return {m: synthesize_waveform(profile, SEP_GEOMETRY, BAND, SYNTH_FS, SYNTH_DURATION,
                                   config=THREE_MODES, modes=[m], provider=provider)
            for m in (1, 2, 3)}


@criterion(1, "closed-form wavenumbers match the solver for the seven duct modes at 100 Hz")
def test_wavenumbers_against_solver(central_ice):
    start = time.perf_counter()
    omega = 2 * np.pi * 100.0
    sol = solve_modes(central_ice, 100.0, default_grid(central_ice, 100.0), max_modes=10)
    m = np.arange(1, 11)
    k_wkb = np.array([float(wkb.k_exact_form(DUCT, j, omega)) for j in m])
    err = np.abs(k_wkb - sol.k[:10]) / sol.k[:10]
    elapsed = time.perf_counter() - start
    assert sol.n_modes >= 10
    assert np.all(err[:7] <= 5e-4)
    assert np.all(err[7:] > err[0])
    assert elapsed <= 10.0


@criterion(2, "stationary phase value equals the phase at the stationary frequency")
def test_stationary_phase_identity():
    rng = np.random.default_rng(2024)
    m = rng.integers(1, 11, 1000)
    r = rng.uniform(1e3, 1e6, 1000)
    t_r = r / DUCT.c0
    # keep the stationary frequency inside 1 Hz .. 10 kHz
    lo = wkb.modal_group_delay(DUCT, m, 2 * np.pi * 1.0, r)
    hi = wkb.modal_group_delay(DUCT, m, 2 * np.pi * 1e4, r)
    t = lo + rng.uniform(0, 1, 1000) * (hi - lo)
    start = time.perf_counter()
    closed = wkb.stationary_phase_value(DUCT, m, r, t)
    direct = wkb.modal_phase(DUCT, m, r, wkb.stationary_frequency(DUCT, m, r, t), t)
    elapsed = time.perf_counter() - start
    assert np.all(t < t_r)
    assert np.max(np.abs(closed - direct) / np.abs(direct)) <= 1e-12
    assert elapsed <= 1.0


@criterion(3, "warped single-mode synthetics are tones at the predicted frequencies")
def test_warped_frequency_law():
    start = time.perf_counter()
    waves = _fresh_single_modes(ModeProvider(DUCT.to_profile(), THREE_MODES))
    peaks = {}
    for m, w in waves.items():
        f, esd = warped_spectrum(warp_signal(w, WarpPlan(T_R)))
        fm = float(wkb.warped_mode_frequency(DUCT, m, RANGE))
        peaks[m] = f[np.argmax(esd)]
        assert abs(peaks[m] - fm) <= 0.25
        assert esd[np.abs(f - fm) <= 1.0].sum() >= 0.8 * esd.sum()
    elapsed = time.perf_counter() - start
    assert [round(peaks[m]) for m in (1, 2, 3)] == [6, 14, 22]
    assert elapsed <= 30.0


@criterion(4, "warping separates a three-mode synthetic and recovers each dispersion curve")
def test_mode_separation():
    start = time.perf_counter()
    provider = ModeProvider(DUCT.to_profile(), THREE_MODES)
    total = synthesize_waveform(DUCT.to_profile(), SEP_GEOMETRY, BAND, SYNTH_FS, SYNTH_DURATION,
                                config=THREE_MODES, provider=provider)
    singles = _fresh_single_modes(provider)
    hop = 16
    seps = separate_modes(total, WarpPlan(T_R), mode_bands(DUCT, RANGE, [1, 2, 3]), hop=hop)
    elapsed = time.perf_counter() - start
    time_bin = hop / SYNTH_FS
    for s in seps:
        assert s.present
        assert correlation(s.waveform, singles[s.m]) >= 0.95
        f, t = s.curve[:, 0], s.curve[:, 1]
        assert f.max() - f.min() >= 50.0
        expect = wkb.modal_group_delay(DUCT, s.m, 2 * np.pi * f, RANGE)
        assert np.max(np.abs(t - expect)) <= time_bin
    assert elapsed <= 60.0


@criterion(5, "warping then unwarping returns band-limited signals")
@pytest.mark.parametrize("band", [(10.0, 100.0), (1.0, 20.0), (50.0, 150.0), (5.0, 190.0)])
def test_round_trip(band):
    fs = 400.0
    t0, t1 = 0.5 * T_R, 0.99 * T_R
    n = int((t1 - t0) * fs)
    rng = np.random.default_rng(int(band[0]))
    sos = signal.butter(8, band, "bandpass", fs=fs, output="sos")
    x = signal.sosfiltfilt(sos, rng.standard_normal(n)) * signal.windows.tukey(n, 0.1)
    w = Waveform(fs, t0, x)
    plan = WarpPlan(T_R, oversample=4)
    assert correlation(unwarp_signal(warp_signal(w, plan), plan, like=w), w) >= 0.99


@criterion(6, "arrivals last longer at 199 km than at 105 km")
def test_duration_grows_with_range(duct_provider):
    durations = []
    for r in (105e3, 199e3):
        t_r = r / DUCT.c0
        w = synthesize_waveform(DUCT.to_profile(), Geometry(60.0, 60.0, r), BAND, SYNTH_FS,
                                SYNTH_DURATION, config=THREE_MODES, provider=duct_provider,
                                t0=t_r - 3.5)
        durations.append(energy_duration(w))
    assert durations[1] > durations[0]


@criterion(7, "eigenfunctions crowd toward the surface as frequency rises and spread with m")
def test_eigenfunction_concentration():
    profile = DUCT.to_profile()
    depth = {}
    for f in (40.0, 50.0, 100.0):
        sol = solve_modes(profile, f, default_grid(profile, f), max_modes=4)
        depth[f] = [mode_surface_concentration(sol, m) for m in range(1, sol.n_modes + 1)]
        assert len(depth[f]) >= 3
        assert all(b > a for a, b in zip(depth[f], depth[f][1:]))
    assert depth[100.0][0] < depth[40.0][0]


@criterion(8, "solver meets the isospeed, orthonormality and grid-refinement oracles")
def test_solver_oracles(central_ice):
    c, h, f = 1500.0, 1000.0, 50.0
    iso = SoundSpeedProfile([0.0, h], [c, c])
    sol = solve_modes(iso, f, DepthGrid(h, c / (40 * f)), max_phase_speed=np.inf)
    m = np.arange(1, sol.n_modes + 1)
    ideal = np.sqrt((2 * np.pi * f / c) ** 2 - (m * np.pi / h) ** 2)
    assert sol.n_modes == 66
    assert np.max(np.abs(sol.k / ideal - 1)) <= 1e-6
    assert orthonormality_error(sol) <= 1e-6
    ice = solve_modes(central_ice, 100.0, default_grid(central_ice, 100.0))
    assert orthonormality_error(ice) <= 1e-6
    grid = default_grid(central_ice, 50.0)
    coarse = solve_modes(central_ice, 50.0, grid, max_modes=7)
    fine = solve_modes(central_ice, 50.0, grid.refined(1), max_modes=7)
    assert np.max(np.abs(coarse.k - fine.k)) <= 1e-7


@criterion(9, "the duct profile changes the near-surface field more than the deep field")
def test_tl_difference_is_shallow(central_ice, dual_channel):
    ranges = np.arange(1e3, 50e3 + 1, 500.0)
    depths = np.arange(5.0, 1000.0, 5.0)
    a = transmission_loss_map(central_ice, 100.0, 60.0, ranges, depths)
    b = transmission_loss_map(dual_channel, 100.0, 60.0, ranges, depths)
    diff = np.abs(a.tl - b.tl)
    assert diff[depths < 400].mean() > diff[depths > 400].mean()


@criterion(10, "identical stations reproduce the range-independent synthesis")
def test_adiabatic_degenerate(central_ice):
    config = SolverConfig(max_modes=2)
    pulse = SourcePulse(10.0, 50.0)
    geometry = Geometry(60.0, 60.0, 30e3)
    direct = synthesize_waveform(central_ice, geometry, pulse, 200.0, 2.0, config=config)
    peak = np.max(np.abs(direct.samples))
    for interp in ("piecewise-constant", "linear-blend"):
        env = RangeDependentEnv(((0.0, central_ice), (12e3, central_ice), (30e3, central_ice)),
                                interpolation=interp)
        stepped = synthesize_waveform(env, geometry, pulse, 200.0, 2.0, config=config)
        assert np.max(np.abs(stepped.samples - direct.samples)) <= 1e-10 * peak
