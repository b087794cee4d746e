"""Closed-form WKB model of a linear surface duct.

For c(z) = c0 (1 + a z) the quantization integral with an ideal pressure
release surface and a caustic turning point gives, per mode m,

    b1(m) = [3 a pi (m - 1/4) c0]^(2/3)
    k_m   = (omega / c0) sqrt(1 - b1 omega^(-2/3))
          ~ omega / c0 - b1 omega^(1/3) / (2 c0)

From the linearized wavenumber, k_m r = omega t_r - t_r b1 omega^(1/3) / 2
with t_r = r / c0. Stationary phase of that spectrum gives the arrival time
of each frequency, the instantaneous phase of each mode, and the time warping
that turns each mode into a pure tone.

``solve_wkb_wavenumber`` solves the quantization condition numerically for
any upward-refracting profile and is the reference the closed forms are
checked against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .env import LinearDuct, SoundSpeedProfile, interpolate_speed
from .errors import CutoffError, InputError, NumericalError

WKB_KTOL = 1e-10
WKB_QUAD_RTOL = 1e-10


@dataclass(frozen=True)
class QuantizationCondition:
    """Phase shifts (rad) at the upper boundary and the lower turning point."""

    surface_phase_shift: float = -np.pi
    turning_phase_shift: float = -np.pi / 2

    def __post_init__(self):
        for v in (self.surface_phase_shift, self.turning_phase_shift):
            if not -2 * np.pi < v <= 0:
                raise InputError("phase shifts must lie in (-2 pi, 0]")


def b1(duct: LinearDuct, m):
    """Mode constant b1 in (rad/s)^(2/3)."""
    m = np.asarray(m, dtype=float)
    if np.any(m < 1):
        raise InputError("mode index must be >= 1")
    return (3.0 * duct.a * np.pi * (m - 0.25) * duct.c0) ** (2.0 / 3.0)


@dataclass(frozen=True)
class DuctDispersion:
    """A linear duct together with its b1 constants for modes 1..n_modes."""

    duct: LinearDuct
    n_modes: int = 10

    @property
    def b1(self) -> dict[int, float]:
        return {m: float(b1(self.duct, m)) for m in range(1, self.n_modes + 1)}

    def arrival_time(self, r):
        return arrival_time(self.duct, r)


def arrival_time(duct: LinearDuct, r):
    """Reference arrival time t_r = r / c0."""
    return np.asarray(r, dtype=float) / duct.c0


def _radicand(duct, m, omega):
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise InputError("angular frequency must be positive")
    return 1.0 - b1(duct, m) * omega ** (-2.0 / 3.0)


def _check_trapped(duct, m, omega):
    rad = _radicand(duct, m, omega)
    if np.any(rad <= 0):
        raise CutoffError(f"mode {m} is cut off at omega={np.min(omega):.6g} rad/s")
    return rad


def cutoff_omega(duct: LinearDuct, m):
    """Angular frequency at which the closed-form wavenumber radicand vanishes."""
    return b1(duct, m) ** 1.5


def k_exact_form(duct: LinearDuct, m, omega):
    """Horizontal wavenumber (rad/m) from the square-root closed form."""
    rad = _check_trapped(duct, m, omega)
    return np.asarray(omega) / duct.c0 * np.sqrt(rad)


def k_linearized(duct: LinearDuct, m, omega):
    """First-order expansion of :func:`k_exact_form`; defined past cutoff."""
    omega = np.asarray(omega, dtype=float)
    return omega / duct.c0 - 0.5 * b1(duct, m) / duct.c0 * np.cbrt(omega)


def turning_depth(duct: LinearDuct, m, omega):
    """Depth (m) of the lower turning point, b1 omega^(-2/3) / (2 a)."""
    _check_trapped(duct, m, omega)
    return b1(duct, m) * np.asarray(omega, dtype=float) ** (-2.0 / 3.0) / (2.0 * duct.a)


def modal_group_delay(duct: LinearDuct, m, omega, r):
    """Arrival time (s) of angular frequency ``omega`` in mode ``m`` at range ``r``."""
    if np.any(np.asarray(r) <= 0):
        raise InputError("range must be positive")
    _check_trapped(duct, m, omega)
    t_r = arrival_time(duct, r)
    return t_r - t_r * b1(duct, m) / 6.0 * np.asarray(omega, dtype=float) ** (-2.0 / 3.0)


def _time_to_go(duct, r, t):
    t_r = arrival_time(duct, r)
    dt = t_r - np.asarray(t, dtype=float)
    if np.any(dt <= 0):
        raise InputError("time must precede the reference arrival t_r = r / c0")
    return t_r, dt


def stationary_frequency(duct: LinearDuct, m, r, t):
    """Angular frequency arriving at time ``t`` (inverse of :func:`modal_group_delay`)."""
    t_r, dt = _time_to_go(duct, r, t)
    return (6.0 * dt / (t_r * b1(duct, m))) ** -1.5


def modal_phase(duct: LinearDuct, m, r, omega, t):
    """Phase omega (t - t_r) + t_r b1 omega^(1/3) / 2 of mode ``m``."""
    t_r = arrival_time(duct, r)
    omega = np.asarray(omega, dtype=float)
    return omega * (np.asarray(t, dtype=float) - t_r) + 0.5 * t_r * b1(duct, m) * np.cbrt(omega)


def stationary_phase_value(duct: LinearDuct, m, r, t):
    """Instantaneous phase (rad) of mode ``m`` at time ``t``."""
    t_r, dt = _time_to_go(duct, r, t)
    return dt**-0.5 * (t_r * b1(duct, m)) ** 1.5 * 2**-0.5 * 3**-1.5


def warped_mode_frequency(duct: LinearDuct, m, r):
    """Frequency (Hz) of mode ``m`` after warping, linear in (m - 1/4)."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise InputError("range must be positive")
    m = np.asarray(m, dtype=float)
    return r**1.5 * duct.c0**-0.5 * 2**-1.5 * 3**-0.5 * duct.a * (m - 0.25)


def warped_mode_frequency_from_phase(duct: LinearDuct, m, r):
    """Same quantity via the warped phase slope (t_r b1)^(3/2) / (sqrt(2) 3^(3/2) 2 pi)."""
    t_r = arrival_time(duct, r)
    return (t_r * b1(duct, m)) ** 1.5 * 2**-0.5 * 3**-1.5 / (2 * np.pi)


def warping_map(u, t_r):
    """Physical time h(u) = t_r - u^(-2) for warped coordinate u > 0."""
    return t_r - np.asarray(u, dtype=float) ** -2.0


def inverse_warping_map(t, t_r):
    """Warped coordinate h^-1(t) = (t_r - t)^(-1/2) for t < t_r."""
    dt = t_r - np.asarray(t, dtype=float)
    if np.any(dt <= 0):
        raise InputError("warping is singular at and after t_r")
    return dt**-0.5


# ---------------------------------------------------------------------------
# Numerical quantization


def _turning_point(profile: SoundSpeedProfile, c_phase: float, max_depth: float):
    """First depth where c(z) reaches ``c_phase``; None when not reached by max_depth."""
    zs = np.append(profile.depths, max_depth)
    zs = zs[zs <= max_depth]
    if zs[0] > 0:
        zs = np.insert(zs, 0, 0.0)
    cs = interpolate_speed(profile, zs)
    if cs[0] >= c_phase:
        return 0.0
    above = np.nonzero(cs >= c_phase)[0]
    if above.size == 0:
        return None
    j = above[0]
    z0, z1, c0, c1 = zs[j - 1], zs[j], cs[j - 1], cs[j]
    return float(z0 + (c_phase - c0) * (z1 - z0) / (c1 - c0))


def wkb_phase_integral(profile: SoundSpeedProfile, k: float, omega: float,
                       max_depth: float = 5000.0) -> float:
    """2 * integral of sqrt((omega/c)^2 - k^2) from the surface to the turning depth."""
    z2 = _turning_point(profile, omega / k, max_depth)
    if z2 is None:
        raise NumericalError("no turning point above max_depth")
    if z2 == 0.0:
        return 0.0

    def kz2(z):
        return (omega / interpolate_speed(profile, z)) ** 2 - k**2

    breaks = [0.0] + [z for z in profile.depths if 0 < z < z2] + [z2]
    total = 0.0
    for lo, hi in zip(breaks[:-2], breaks[1:-1]):
        val, _ = integrate.quad(lambda z: np.sqrt(max(kz2(z), 0.0)), lo, hi,
                                epsabs=0.0, epsrel=WKB_QUAD_RTOL, limit=200)
        total += val
    lo = breaks[-2]
    # the integrand vanishes like sqrt(z2 - z); fold that factor into the weight
    val, _ = integrate.quad(lambda z: np.sqrt(max(kz2(z), 0.0) / (z2 - z)) if z < z2 else 0.0,
                            lo, z2, weight="alg", wvar=(0.0, 0.5),
                            epsabs=0.0, epsrel=WKB_QUAD_RTOL, limit=200)
    total += val
    return 2.0 * total


def solve_wkb_wavenumber(profile: SoundSpeedProfile, m: int, omega: float,
                         qc: QuantizationCondition = QuantizationCondition(),
                         max_depth: float = 5000.0) -> float:
    """Horizontal wavenumber satisfying the WKB quantization condition.

    Solves ``phi(k) + turning_shift + surface_shift = 2 (m - 1) pi`` by
    bisection on k, with phi from adaptive quadrature.

    Raises
    ------
    CutoffError
        The profile has no turning point, or mode ``m`` is not trapped above
        ``max_depth``.
    """
    if m < 1:
        raise InputError("mode index must be >= 1")
    target = 2 * (m - 1) * np.pi - qc.turning_phase_shift - qc.surface_phase_shift
    c_surf = interpolate_speed(profile, 0.0)
    c_deep = interpolate_speed(profile, max_depth)
    if c_deep <= c_surf:
        raise CutoffError("profile has no turning point below the surface")
    k_hi = omega / c_surf
    k_lo = omega / c_deep * (1 + 1e-12)

    def resid(k):
        return wkb_phase_integral(profile, k, omega, max_depth) - target

    if resid(k_lo) < 0:
        raise CutoffError(f"mode {m} is not trapped above {max_depth:g} m")
    return float(optimize.bisect(resid, k_lo, k_hi, xtol=WKB_KTOL, maxiter=200))
