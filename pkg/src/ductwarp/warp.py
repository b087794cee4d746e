"""Single-receiver modal processing: STFT, time warping, mode separation.

Warping resamples a signal on the coordinate u = (t_r - t)^(-1/2). A duct
mode whose phase is K (t_r - t)^(-1/2) becomes exp(j K u), a pure tone at
K / (2 pi), so modes can be isolated with ordinary bandpass filters in the
warped domain and mapped back with the inverse transform.

Internally the warped axis runs from early to late time (increasing u); the
amplitude factor sqrt(|dh/du|) keeps the transform energy preserving.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import signal
from scipy.interpolate import CubicSpline

from . import wkb
from .env import LinearDuct
from .errors import InputError, NumericalError
from .synth import Waveform

INTERPOLATORS = ("linear", "cubic")


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """STFT magnitudes; ``mag[i, j]`` is time ``times[i]``, frequency ``freqs[j]``."""

    times: np.ndarray
    freqs: np.ndarray
    mag: np.ndarray
    window_len: int
    hop: int

    @property
    def time_step(self) -> float:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else np.nan

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("time_s\\freq_hz," + ",".join(repr(float(f)) for f in self.freqs) + "\n")
        for t, row in zip(self.times, self.mag):
            out.write(repr(float(t)) + "," + ",".join(repr(float(v)) for v in row) + "\n")
        return out.getvalue()


@dataclass(frozen=True)
class WarpPlan:
    """Parameters of the warping transform.

    ``rate`` fixes the warped sampling rate; by default it is
    ``oversample * sample_rate * max(1, max dt/du)`` over the input support,
    so the warped grid is never coarser than the input anywhere.
    ``tail_tolerance`` is the largest fraction of input energy allowed at or
    after t_r before the transform refuses the signal.
    """

    t_r: float
    oversample: float = 4.0
    interp: str = "cubic"
    rate: float | None = None
    tail_tolerance: float = 1e-3

    def __post_init__(self):
        if not (np.isfinite(self.t_r) and self.t_r > 0):
            raise InputError("t_r must be finite and positive")
        if not self.oversample >= 1:
            raise InputError("oversample must be >= 1")
        if self.interp not in INTERPOLATORS:
            raise InputError(f"interp must be one of {INTERPOLATORS}")


@dataclass(frozen=True)
class ModeBand:
    m: int
    center: float
    halfwidth: float

    def __post_init__(self):
        if not self.center > self.halfwidth > 0:
            raise InputError("ModeBand requires center > halfwidth > 0")

    @property
    def lo(self) -> float:
        return self.center - self.halfwidth

    @property
    def hi(self) -> float:
        return self.center + self.halfwidth


@dataclass(frozen=True, eq=False)
class SeparatedMode:
    m: int
    waveform: Waveform
    curve: np.ndarray
    present: bool
    energy_fraction: float


def mode_bands(duct: LinearDuct, r: float, modes, halfwidth_fraction: float = 0.4) -> list[ModeBand]:
    """Bands centered on the warped mode frequencies; halfwidth is a fraction of their spacing."""
    modes = list(np.atleast_1d(modes))
    spacing = float(wkb.warped_mode_frequency(duct, 2, r) - wkb.warped_mode_frequency(duct, 1, r))
    return [ModeBand(int(m), float(wkb.warped_mode_frequency(duct, m, r)),
                     halfwidth_fraction * spacing) for m in modes]


# ---------------------------------------------------------------------------
# Time-frequency


def stft(w: Waveform, window_len: int, hop: int) -> Spectrogram:
    """Magnitude STFT with a Hann window, frames centered on ``t0 + i*hop/fs``."""
    x = w.samples
    if window_len > x.size:
        raise InputError("window longer than signal")
    if hop < 1 or window_len < 2:
        raise InputError("hop must be >= 1 and window_len >= 2")
    half = window_len // 2
    padded = np.concatenate([np.zeros(half), x, np.zeros(window_len - half)])
    n_frames = (x.size - 1) // hop + 1
    frames = np.lib.stride_tricks.sliding_window_view(padded, window_len)[::hop][:n_frames]
    win = signal.get_window("hann", window_len)
    mag = np.abs(np.fft.rfft(frames * win, axis=1))
    times = w.t0 + np.arange(n_frames) * hop / w.sample_rate
    freqs = np.fft.rfftfreq(window_len, 1.0 / w.sample_rate)
    return Spectrogram(times, freqs, mag, window_len, hop)


def extract_dispersion(sg: Spectrogram, threshold_fraction: float = 0.1,
                       refine: bool = False) -> np.ndarray:
    """Ridge as an array of ``(f, t)`` rows, one per sufficiently strong frequency bin.

    A bin qualifies when its strongest frame reaches ``threshold_fraction``
    of the global maximum; its time is that frame's (earliest on ties).
    With ``refine`` the time is moved to the vertex of a parabola through the
    log magnitudes of the peak frame and its two neighbours, which removes
    the frame quantization of the plain argmax.
    """
    if not 0 < threshold_fraction < 1:
        raise InputError("threshold_fraction must lie in (0, 1)")
    mag = sg.mag
    peak = mag.max() if mag.size else 0.0
    if peak <= 0:
        return np.empty((0, 2))
    col_max = mag.max(axis=0)
    keep = np.nonzero(col_max >= threshold_fraction * peak)[0]
    idx = np.argmax(mag[:, keep], axis=0)
    times = sg.times[idx].astype(float)
    if refine and sg.times.size >= 3:
        inner = (idx > 0) & (idx < sg.times.size - 1)
        i, j = idx[inner], keep[inner]
        with np.errstate(divide="ignore"):
            lm = np.log(np.stack([mag[i - 1, j], mag[i, j], mag[i + 1, j]]))
        lo, mid, hi = lm
        curv = lo - 2.0 * mid + hi
        ok = np.isfinite(curv) & (curv < 0)
        shift = np.zeros_like(curv)
        shift[ok] = 0.5 * (lo[ok] - hi[ok]) / curv[ok]
        times[inner] += shift * sg.time_step
    return np.column_stack([sg.freqs[keep], times])


# ---------------------------------------------------------------------------
# Warping


def _interpolant(x, y, kind):
    if kind == "cubic":
        spline = CubicSpline(x, y, extrapolate=False)
        return lambda q: np.nan_to_num(spline(q))
    return lambda q: np.interp(q, x, y, left=0.0, right=0.0)


def warp_signal(w: Waveform, plan: WarpPlan) -> Waveform:
    """Resample ``w`` on the warped axis u = (t_r - t)^(-1/2).

    The returned waveform's ``t0`` is the first warped coordinate and its
    ``sample_rate`` the warped sampling rate (samples per unit of u).
    """
    t = w.times
    x = w.samples
    t_r = plan.t_r
    dt = 1.0 / w.sample_rate
    # the last sample strictly more than one period before t_r is the last usable one
    usable = (t < t_r - dt) & (t > 0)
    if np.count_nonzero(usable) < 4:
        raise InputError("signal support must lie in (0, t_r)")
    total = float(np.sum(x**2))
    tail = float(np.sum(x[~usable] ** 2))
    if total > 0 and tail > plan.tail_tolerance * total:
        raise InputError(
            f"signal support reaches t_r: {tail / total:.2e} of the energy lies "
            f"outside (0, t_r - dt)"
        )
    tt = t[usable]
    xx = x[usable]
    u0 = float(wkb.inverse_warping_map(tt[0], t_r))
    u1 = float(wkb.inverse_warping_map(tt[-1], t_r))
    rate = plan.rate
    if rate is None:
        stretch = 2.0 * (t_r - tt[0]) ** 1.5
        rate = plan.oversample * w.sample_rate * max(1.0, stretch)
    n = int(np.floor((u1 - u0) * rate)) + 1
    u = u0 + np.arange(n) / rate
    th = wkb.warping_map(u, t_r)
    y = _interpolant(tt, xx, plan.interp)(th) * np.sqrt(2.0 * u**-3)
    return Waveform(rate, u0, y)


def unwarp_signal(w: Waveform, plan: WarpPlan, like: Waveform | None = None) -> Waveform:
    """Map a warped-domain signal back to physical time.

    Output is on the time grid of ``like`` when given; otherwise it covers
    the image of the warped support at ``w.sample_rate / plan.oversample``.
    Samples outside that image are zero.
    """
    u = w.times
    t_r = plan.t_r
    if like is not None:
        fs, t = like.sample_rate, like.times
    else:
        fs = w.sample_rate / plan.oversample
        t_start = float(wkb.warping_map(u[0], t_r))
        t_end = float(wkb.warping_map(u[-1], t_r))
        t = t_start + np.arange(int(np.floor((t_end - t_start) * fs)) + 1) / fs
    inside = (t < t_r) & (t > 0)
    out = np.zeros(t.size)
    if inside.any():
        uq = wkb.inverse_warping_map(t[inside], t_r)
        gain = np.sqrt(0.5 * (t_r - t[inside]) ** -1.5)
        out[inside] = _interpolant(u, w.samples, plan.interp)(uq) * gain
    return Waveform(fs, float(t[0]), out)


# ---------------------------------------------------------------------------
# Filtering and separation


def bandpass(w: Waveform, lo: float, hi: float, transition: float | None = None,
             attenuation_db: float = 60.0) -> Waveform:
    """Zero-phase Kaiser-windowed-sinc bandpass with cutoffs ``lo``/``hi`` (Hz)."""
    fs = w.sample_rate
    if not 0 < lo < hi < fs / 2:
        raise InputError("band edges must satisfy 0 < lo < hi < fs/2")
    if transition is None:
        transition = 0.5 * (hi - lo) / 2
    transition = min(transition, lo)
    numtaps, beta = signal.kaiserord(attenuation_db, transition / (0.5 * fs))
    numtaps |= 1
    taps = signal.firwin(numtaps, [lo, hi], window=("kaiser", beta), pass_zero=False, fs=fs)
    y = signal.fftconvolve(w.samples, taps, mode="same")
    return Waveform(fs, w.t0, y)


def _check_bands(bands):
    """Raise on overlap; return the narrowest guard gap between neighbours (inf if single)."""
    ordered = sorted(bands, key=lambda b: b.center)
    gap = np.inf
    for a, b in zip(ordered, ordered[1:]):
        if a.hi > b.lo:
            raise InputError(f"bands for modes {a.m} and {b.m} overlap")
        gap = min(gap, b.lo - a.hi)
    return gap


def separate_modes(w: Waveform, plan: WarpPlan, bands, window_len: int = 256, hop: int = 16,
                   threshold_fraction: float = 0.2, absent_fraction: float = 0.01,
                   transition: float | None = None) -> list[SeparatedMode]:
    """Warp, filter each band, unwarp and extract a dispersion ridge per mode.

    Ridges use the refined peak time of :func:`extract_dispersion`.

    A band whose warped-domain energy is below ``absent_fraction`` of the
    strongest band is reported absent (``present=False``, empty curve).
    """
    bands = list(bands)
    gap = _check_bands(bands)
    if transition is None and np.isfinite(gap) and gap > 0:
        transition = gap
    warped = warp_signal(w, plan)
    filtered = [bandpass(warped, b.lo, b.hi, transition) for b in bands]
    energies = np.array([f.energy() for f in filtered])
    ref = energies.max() if energies.size else 0.0
    out = []
    for b, f, e in zip(bands, filtered, energies):
        present = ref > 0 and e >= absent_fraction * ref
        mode_w = unwarp_signal(f, plan, like=w)
        curve = (extract_dispersion(stft(mode_w, window_len, hop), threshold_fraction,
                                     refine=True)
                 if present else np.empty((0, 2)))
        out.append(SeparatedMode(b.m, mode_w, curve, bool(present),
                                 float(e / ref) if ref > 0 else 0.0))
    return out


def warped_spectrum(w: Waveform, pad_to: float | None = None):
    """Energy spectral density of a warped signal: (freqs, |sum y e^{-j2pi f u} du|^2)."""
    n = w.samples.size
    if pad_to is not None:
        n = max(n, int(np.ceil(pad_to * w.sample_rate)))
    Y = np.fft.rfft(w.samples, n) / w.sample_rate
    return np.fft.rfftfreq(n, 1.0 / w.sample_rate), np.abs(Y) ** 2


def estimate_tr(w: Waveform | None, r: float, c0: float, *, scan: float = 0.01,
                n_points: int = 201, oversample: float = 4.0,
                pad_to: float = 8.0) -> float:
    """Reference arrival time r / c0, refined on a measured signal when given.

    With a waveform, candidates within ``+/- scan`` of r / c0 are scored by
    the peak of the warped energy spectrum; the best interior candidate is
    returned. If the best score sits on the scan boundary the nominal value
    is returned instead.

    The score rewards a single sharp warped line, so the refinement is
    reliable when one mode dominates the recording. With several modes of
    similar strength it can trade one line's sharpness against another's and
    land a few tenths of a percent off.
    """
    if not (r > 0 and c0 > 0):
        raise InputError("range and sound speed must be positive")
    nominal = r / c0
    if w is None:
        return nominal
    candidates = nominal * np.linspace(1 - scan, 1 + scan, n_points)
    scores = np.array([_concentration(w, tr, oversample, pad_to) for tr in candidates])
    best = int(np.argmax(scores))
    if best in (0, n_points - 1) or not np.isfinite(scores[best]):
        warnings.warn("t_r scan found no interior maximum; using r / c0", RuntimeWarning)
        return nominal
    return float(candidates[best])


def _concentration(w, t_r, oversample, pad_to):
    plan = WarpPlan(t_r, oversample=oversample, interp="linear", tail_tolerance=np.inf)
    try:
        warped = warp_signal(w, plan)
    except InputError:
        return -np.inf
    _, esd = warped_spectrum(warped, pad_to)
    return float(esd[1:].max())


def correlation(a, b) -> float:
    """Normalized zero-lag correlation of two equal-length sequences."""
    a = np.asarray(getattr(a, "samples", a), dtype=float)
    b = np.asarray(getattr(b, "samples", b), dtype=float)
    den = np.sqrt(np.dot(a, a) * np.dot(b, b))
    if den == 0:
        raise NumericalError("correlation of a zero signal")
    return float(np.dot(a, b) / den)
