"""Broadband synthesis from the normal-mode sum.

The pressure spectrum at range r and receiver depth z_r is

    P(w) = S(w) j e^{-j pi/4} / (rho sqrt(8 pi r))
           * sum_m psi_m(z_s) psi_m(z_r) e^{-alpha_m r} e^{j k_m r} / sqrt(k_m)

with the e^{-j w t} time convention, so a waveform is recovered as
p(t) = (1/pi) Re int_0^inf P(w) e^{-j w t} dw, evaluated on a DFT grid.
"""

from __future__ import annotations

import io
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import wkb
from .env import (WATER_DENSITY, LinearDuct, RangeDependentEnv, SoundSpeedProfile,
                  env_at_range, interpolate_speed, station_nodes)
from .errors import InputError, NoModesError
from .modes import (DEFAULT_DEPTH, POINTS_PER_WAVELENGTH, RICHARDSON_LEVELS, ModeSolution,
                    default_grid, solve_modes)

log = logging.getLogger(__name__)

PULSE_SHAPES = ("flat-band", "raised-cosine-band")


def thread_count() -> int:
    """Worker cap from ``DUCTWARP_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("DUCTWARP_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class SourcePulse:
    """Band-limited source spectrum between ``f_lo`` and ``f_hi`` (Hz).

    ``raised-cosine-band`` is flat with cosine tapers occupying ``taper`` of
    the bandwidth at each edge.
    """

    f_lo: float
    f_hi: float
    shape: str = "raised-cosine-band"
    taper: float = 0.1

    def __post_init__(self):
        if not 0 < self.f_lo < self.f_hi:
            raise InputError("SourcePulse requires 0 < f_lo < f_hi")
        if self.shape not in PULSE_SHAPES:
            raise InputError(f"shape must be one of {PULSE_SHAPES}")
        if not 0 < self.taper <= 0.5:
            raise InputError("taper must lie in (0, 0.5]")

    def spectrum(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        s = ((f >= self.f_lo) & (f <= self.f_hi)).astype(float)
        if self.shape == "raised-cosine-band":
            w = self.taper * (self.f_hi - self.f_lo)
            lo = (f >= self.f_lo) & (f < self.f_lo + w)
            hi = (f > self.f_hi - w) & (f <= self.f_hi)
            s[lo] = 0.5 - 0.5 * np.cos(np.pi * (f[lo] - self.f_lo) / w)
            s[hi] = 0.5 - 0.5 * np.cos(np.pi * (self.f_hi - f[hi]) / w)
        return s


@dataclass(frozen=True)
class Geometry:
    z_s: float
    z_r: float
    r: float

    def __post_init__(self):
        if not (self.z_s > 0 and self.z_r > 0 and self.r > 0):
            raise InputError("source depth, receiver depth and range must be positive")


@dataclass(frozen=True, eq=False)
class Waveform:
    """Uniformly sampled real signal starting at absolute time ``t0``."""

    sample_rate: float
    t0: float
    samples: np.ndarray

    def __post_init__(self):
        x = np.array(self.samples, dtype=float)
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        if not self.sample_rate > 0:
            raise InputError("sample_rate must be positive")
        if x.ndim != 1 or not np.all(np.isfinite(x)):
            raise InputError("samples must be a finite 1-D sequence")

    def __len__(self):
        return self.samples.size

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.samples.size) / self.sample_rate

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def energy(self) -> float:
        return float(np.sum(self.samples**2) / self.sample_rate)

    def __add__(self, other: "Waveform") -> "Waveform":
        if other.sample_rate != self.sample_rate or other.t0 != self.t0 or len(other) != len(self):
            raise InputError("waveforms must share a time grid")
        return Waveform(self.sample_rate, self.t0, self.samples + other.samples)


@dataclass(frozen=True, eq=False)
class TLMap:
    """Transmission loss (dB re 1 m) on a range x depth grid; ``tl[i, j]`` is depth i, range j."""

    ranges: np.ndarray
    depths: np.ndarray
    tl: np.ndarray

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("depth_m\\range_m," + ",".join(repr(float(r)) for r in self.ranges) + "\n")
        for z, row in zip(self.depths, self.tl):
            out.write(repr(float(z)) + "," + ",".join(repr(float(v)) for v in row) + "\n")
        return out.getvalue()


@dataclass(frozen=True)
class SolverConfig:
    """How per-frequency mode solutions are obtained during synthesis."""

    depth_max: float = DEFAULT_DEPTH
    points_per_wavelength: int = POINTS_PER_WAVELENGTH
    max_phase_speed: float | None = None
    max_modes: int | None = None
    richardson_levels: int = RICHARDSON_LEVELS


class ModeProvider:
    """Caches :class:`ModeSolution` objects per frequency for one profile.

    Returns None for frequencies with no propagating modes. ``alpha`` (Np/m,
    scalar or per-mode sequence) is injected into every solution.
    """

    def __init__(self, profile: SoundSpeedProfile, config: SolverConfig = SolverConfig(),
                 rho: float = WATER_DENSITY, alpha=0.0, depth_max: float | None = None):
        self.profile = profile
        self.config = config
        self.rho = rho
        self.alpha = alpha
        self.depth_max = config.depth_max if depth_max is None else depth_max
        self._cache: dict[float, ModeSolution | None] = {}

    def _solve(self, f: float):
        cfg = self.config
        grid = default_grid(self.profile, f, self.depth_max, cfg.points_per_wavelength)
        try:
            sol = solve_modes(self.profile, f, grid, cfg.max_phase_speed, cfg.max_modes,
                              self.rho, cfg.richardson_levels)
        except NoModesError:
            return None
        if np.any(np.asarray(self.alpha) != 0):
            alpha = np.asarray(self.alpha, dtype=float)
            if alpha.ndim:
                alpha = np.resize(alpha, sol.n_modes) if alpha.size < sol.n_modes else alpha[:sol.n_modes]
            sol = sol.with_alpha(alpha)
        return sol

    def __call__(self, f: float) -> ModeSolution | None:
        f = float(f)
        if f not in self._cache:
            self._cache[f] = self._solve(f)
        return self._cache[f]

    def prefetch(self, freqs) -> None:
        todo = sorted({float(f) for f in freqs} - set(self._cache))
        workers = thread_count()
        if workers > 1 and len(todo) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                for f, sol in zip(todo, pool.map(self._solve, todo)):
                    self._cache[f] = sol
        else:
            for f in todo:
                self._cache[f] = self._solve(f)


def _mode_columns(sol: ModeSolution, modes):
    if modes is None:
        return np.arange(sol.n_modes)
    idx = np.array([m - 1 for m in modes if 1 <= m <= sol.n_modes], dtype=int)
    return idx


def _prefactor(r, rho):
    return 1j * np.exp(-1j * np.pi / 4) / (rho * np.sqrt(8 * np.pi * r))


def synthesize_pressure_spectrum(provider, geometry: Geometry, pulse: SourcePulse | None,
                                 freqs, modes=None) -> np.ndarray:
    """Complex pressure at each frequency of ``freqs`` (Hz).

    ``provider(f)`` must return a :class:`ModeSolution` or None. ``modes``
    restricts the sum to the given 1-based indices. ``pulse=None`` means a
    unit source spectrum.
    """
    freqs = np.asarray(freqs, dtype=float)
    s = np.ones_like(freqs) if pulse is None else pulse.spectrum(freqs)
    active = np.nonzero((s != 0) & (freqs > 0))[0]
    if hasattr(provider, "prefetch"):
        provider.prefetch(freqs[active])
    P = np.zeros(freqs.size, dtype=complex)
    r = geometry.r
    any_modes = False
    for i in active:
        sol = provider(freqs[i])
        if sol is None:
            continue
        cols = _mode_columns(sol, modes)
        if cols.size == 0:
            continue
        any_modes = True
        k = sol.k[cols]
        amp = sol.psi_at(geometry.z_s)[cols] * sol.psi_at(geometry.z_r)[cols]
        terms = amp * np.exp(-sol.alpha[cols] * r) * np.exp(1j * k * r) / np.sqrt(k)
        P[i] = s[i] * _prefactor(r, sol.rho) * terms.sum()
    if not any_modes:
        raise NoModesError("no propagating modes at any synthesis frequency")
    return P


def dft_frequencies(sample_rate: float, duration: float) -> tuple[int, np.ndarray]:
    n = int(round(duration * sample_rate))
    if n < 2:
        raise InputError("duration too short for the sample rate")
    return n, np.fft.rfftfreq(n, 1.0 / sample_rate)


def spectrum_to_waveform(P, sample_rate: float, t0: float) -> Waveform:
    """Real waveform on ``[t0, t0 + n/fs)`` from positive-frequency samples ``P``.

    ``P`` holds the rfft bins of an ``n``-sample record with ``n`` even.
    """
    P = np.asarray(P, dtype=complex)
    n = 2 * (P.size - 1)
    f = np.fft.rfftfreq(n, 1.0 / sample_rate)
    X = np.conj(P * np.exp(-2j * np.pi * f * t0))
    X[0] = 0.0
    X[-1] = 0.0
    return Waveform(sample_rate, t0, sample_rate * np.fft.irfft(X, n))


def spectrum_energy(P, duration: float) -> float:
    """(1/pi) int_0^inf |P|^2 dw on the DFT grid; equals the waveform energy."""
    P = np.asarray(P)
    return float(2.0 / duration * np.sum(np.abs(P[1:-1]) ** 2))


def _adiabatic_spectrum(env: RangeDependentEnv, geometry, pulse, freqs, config, modes, alpha):
    r = geometry.r
    nodes = station_nodes(env, r)
    profiles = [env_at_range(env, x) for x in nodes]
    providers = {}
    node_providers = []
    for x, p in zip(nodes, profiles):
        depth = config.depth_max if env.bathymetry is None else float(env.bathymetry.depth_at(x))
        key = (id(p), depth)
        if key not in providers:
            providers[key] = ModeProvider(p, config, env.rho, alpha, depth)
        node_providers.append(providers[key])

    s = pulse.spectrum(freqs)
    active = np.nonzero((s != 0) & (freqs > 0))[0]
    for prov in providers.values():
        prov.prefetch(freqs[active])
    P = np.zeros(freqs.size, dtype=complex)
    dropped = np.zeros(freqs.size, dtype=int)
    seg = np.diff(nodes)
    for i in active:
        sols = [prov(freqs[i]) for prov in node_providers]
        if any(sol is None for sol in sols):
            continue
        m_common = min(sol.n_modes for sol in sols)
        dropped[i] = sols[0].n_modes - m_common
        cols = _mode_columns(sols[0], modes)
        cols = cols[cols < m_common]
        if cols.size == 0:
            continue
        K = np.array([sol.k[cols] for sol in sols])
        A = np.array([sol.alpha[cols] for sol in sols])
        if env.interpolation == "piecewise-constant":
            phase = seg @ K[:-1]
            loss = seg @ A[:-1]
        else:
            phase = seg @ (0.5 * (K[:-1] + K[1:]))
            loss = seg @ (0.5 * (A[:-1] + A[1:]))
        k_mean = phase / r
        amp = sols[0].psi_at(geometry.z_s)[cols] * sols[-1].psi_at(geometry.z_r)[cols]
        terms = amp * np.exp(-loss) * np.exp(1j * phase) / np.sqrt(k_mean)
        P[i] = s[i] * _prefactor(r, env.rho) * terms.sum()
    return P, dropped


def synthesize_waveform(env, geometry: Geometry, pulse: SourcePulse, sample_rate: float,
                        duration: float, *, config: SolverConfig = SolverConfig(),
                        modes=None, t0: float | None = None, alpha=0.0,
                        provider: ModeProvider | None = None) -> Waveform:
    """Time series at the receiver.

    ``env`` is either a :class:`SoundSpeedProfile` (range independent) or a
    :class:`RangeDependentEnv`, which selects the adiabatic mode sum: phase
    is the range integral of each mode's wavenumber over the station
    solutions, matched by mode index. Modes present at the source but missing
    at some station are dropped and logged.

    The record has ``round(duration * sample_rate)`` samples and, unless
    ``t0`` is given, is centered on t_r = r / c(0) of the receiver-side
    profile.
    """
    if sample_rate < 4 * pulse.f_hi:
        raise InputError(
            f"aliasing: sample_rate {sample_rate:g} Hz < 4 * f_hi = {4 * pulse.f_hi:g} Hz"
        )
    n, freqs = dft_frequencies(sample_rate, duration)
    if n % 2:
        raise InputError("duration * sample_rate must be an even number of samples")
    if isinstance(env, RangeDependentEnv):
        rx_profile = env_at_range(env, geometry.r)
        P, dropped = _adiabatic_spectrum(env, geometry, pulse, freqs, config, modes, alpha)
        if not np.any(P):
            raise NoModesError("no propagating modes at any synthesis frequency")
        if dropped.any():
            log.warning("adiabatic synthesis dropped modes at %d frequencies (max %d per frequency)",
                        int(np.count_nonzero(dropped)), int(dropped.max()))
    else:
        rx_profile = env
        if provider is None:
            provider = ModeProvider(env, config, alpha=alpha)
        P = synthesize_pressure_spectrum(provider, geometry, pulse, freqs, modes)
    if t0 is None:
        t_r = geometry.r / interpolate_speed(rx_profile, 0.0)
        t0 = t_r - 0.5 * n / sample_rate
    return spectrum_to_waveform(P, sample_rate, t0)


def synthesize_duct_waveform(duct: LinearDuct, r: float, modes, pulse: SourcePulse,
                             sample_rate: float, duration: float, t0: float | None = None,
                             amplitudes=None) -> Waveform:
    """Closed-form duct arrivals: unit-amplitude modes with the linearized wavenumber.

    Each mode contributes S(w) exp(j k_lin(w) r); nothing here touches the
    numerical solver, so it serves as an independent reference signal.
    """
    n, freqs = dft_frequencies(sample_rate, duration)
    s = pulse.spectrum(freqs)
    modes = list(np.atleast_1d(modes))
    amps = np.ones(len(modes)) if amplitudes is None else np.asarray(amplitudes, dtype=float)
    P = np.zeros(freqs.size, dtype=complex)
    on = (s != 0) & (freqs > 0)
    w = 2 * np.pi * freqs[on]
    for m, amp in zip(modes, amps):
        P[on] += amp * s[on] * np.exp(1j * wkb.k_linearized(duct, m, w) * r)
    if t0 is None:
        t0 = float(wkb.arrival_time(duct, r)) - 0.5 * n / sample_rate
    return spectrum_to_waveform(P, sample_rate, t0)


def transmission_loss_map(profile: SoundSpeedProfile, frequency: float, z_s: float,
                          range_grid, depth_grid, config: SolverConfig = SolverConfig(),
                          alpha=0.0, rho: float = WATER_DENSITY) -> TLMap:
    """TL(z, r) = -20 log10(4 pi |P|) for a unit source spectrum.

    The 4 pi factor references the field to the free-field amplitude at 1 m
    of the point source implied by the normalization of the mode sum.
    """
    ranges = np.asarray(range_grid, dtype=float)
    depths = np.asarray(depth_grid, dtype=float)
    if np.any(ranges <= 0):
        raise InputError("ranges must be positive")
    sol = ModeProvider(profile, config, rho, alpha)(frequency)
    if sol is None:
        raise NoModesError(f"no propagating modes at {frequency:g} Hz")
    psi_s = sol.psi_at(z_s)
    psi_r = np.array([np.interp(depths, sol.z, sol.psi[:, j]) for j in range(sol.n_modes)])
    modal = np.exp((1j * sol.k - sol.alpha)[:, None] * ranges[None, :]) / np.sqrt(sol.k)[:, None]
    field_ = (psi_r * psi_s[:, None]).T @ modal
    P = _prefactor(ranges, sol.rho)[None, :] * field_
    with np.errstate(divide="ignore"):
        tl = -20.0 * np.log10(4 * np.pi * np.abs(P))
    return TLMap(ranges, depths, tl)


def dispersion_skeleton(duct: LinearDuct, r: float, modes, freq_band, n_freqs: int = 91) -> np.ndarray:
    """Closed-form arrival time per (mode, frequency).

    Returns an array with columns ``m, f_hz, t_s``. Frequencies at or below a
    mode's cutoff are left out; an empty band gives an empty array.
    """
    f_lo, f_hi = freq_band
    if not f_hi > f_lo:
        return np.empty((0, 3))
    f = np.linspace(f_lo, f_hi, n_freqs)
    f = f[f > 0]
    rows = []
    for m in np.atleast_1d(modes):
        w = 2 * np.pi * f
        ok = w > wkb.cutoff_omega(duct, m)
        if not ok.any():
            continue
        t = wkb.modal_group_delay(duct, m, w[ok], r)
        rows.append(np.column_stack([np.full(ok.sum(), m), f[ok], t]))
    return np.vstack(rows) if rows else np.empty((0, 3))


def energy_duration(w: Waveform, fraction: float = 0.95) -> float:
    """Length of the interval between the (1-fraction)/2 and (1+fraction)/2 energy quantiles."""
    e = np.cumsum(w.samples**2)
    if e[-1] == 0:
        return 0.0
    e /= e[-1]
    lo = np.searchsorted(e, 0.5 * (1 - fraction))
    hi = np.searchsorted(e, 0.5 * (1 + fraction))
    return (hi - lo) / w.sample_rate
