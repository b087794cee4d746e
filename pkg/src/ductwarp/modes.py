"""Finite-difference normal-mode solver for range-independent profiles.

The depth equation

    psi'' + (omega^2 / c(z)^2 - k^2) psi = 0,   psi(0) = psi(H) = 0

is discretized with the three-point second difference, which turns it into a
symmetric tridiagonal eigenproblem in k^2. Eigenvalues come from Sturm
sequence bisection (LAPACK ``stebz``) on the user grid and on successively
halved grids; a Romberg table of Richardson extrapolations cancels the
even-power discretization errors O(dz^2), O(dz^4), ... Eigenvectors come
from inverse iteration on the user grid.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import eigh_tridiagonal, solve_banded

from .env import WATER_DENSITY, SoundSpeedProfile, interpolate_speed
from .errors import InputError, NoModesError, NumericalError

DEFAULT_DEPTH = 2000.0
POINTS_PER_WAVELENGTH = 20
RICHARDSON_LEVELS = 2


@dataclass(frozen=True)
class DepthGrid:
    """Uniform depth grid on [0, depth_max].

    When ``depth_max / dz`` is not an integer the spacing is shrunk to the
    next value that divides the column exactly.
    """

    depth_max: float
    dz: float

    def __post_init__(self):
        if not (self.depth_max > 0 and self.dz > 0):
            raise InputError("DepthGrid requires depth_max > 0 and dz > 0")
        if self.depth_max / self.dz < 100:
            raise InputError("DepthGrid needs at least 100 intervals (depth_max/dz >= 100)")

    @property
    def n_intervals(self) -> int:
        return int(np.ceil(self.depth_max / self.dz - 1e-9))

    @property
    def spacing(self) -> float:
        return self.depth_max / self.n_intervals

    @property
    def z(self) -> np.ndarray:
        return np.linspace(0.0, self.depth_max, self.n_intervals + 1)

    def refined(self, level: int) -> "DepthGrid":
        return DepthGrid(self.depth_max, self.spacing / 2**level)

    @classmethod
    def for_frequency(cls, depth_max, frequency, c_min, points_per_wavelength=POINTS_PER_WAVELENGTH):
        """Coarsest grid that still has ``points_per_wavelength`` per acoustic wavelength."""
        dz = c_min / (points_per_wavelength * frequency)
        dz = min(dz, depth_max / 100)
        return cls(depth_max, dz)


class Mode(NamedTuple):
    m: int
    k: float
    psi: np.ndarray
    alpha: float
    group_speed: float


@dataclass(frozen=True, eq=False)
class ModeSolution:
    """Eigenpairs at one frequency, ordered by decreasing horizontal wavenumber.

    ``psi`` has shape ``(len(grid.z), n_modes)``; each column is normalized
    so that ``trapz(psi**2, z) / rho == 1``.
    """

    frequency: float
    grid: DepthGrid
    k: np.ndarray
    psi: np.ndarray
    alpha: np.ndarray
    group_speed: np.ndarray
    rho: float = WATER_DENSITY

    @property
    def omega(self) -> float:
        return 2 * np.pi * self.frequency

    @property
    def n_modes(self) -> int:
        return self.k.size

    @property
    def z(self) -> np.ndarray:
        return self.grid.z

    def mode(self, m: int) -> Mode:
        if not 1 <= m <= self.n_modes:
            raise IndexError(f"mode {m} not present ({self.n_modes} modes)")
        i = m - 1
        return Mode(m, float(self.k[i]), self.psi[:, i], float(self.alpha[i]),
                    float(self.group_speed[i]))

    def psi_at(self, depth, m=None) -> np.ndarray:
        """Eigenfunction values at ``depth`` (linear interpolation on the grid)."""
        cols = self.psi if m is None else self.psi[:, [mm - 1 for mm in np.atleast_1d(m)]]
        z = self.z
        out = np.empty(cols.shape[1])
        for j in range(cols.shape[1]):
            out[j] = np.interp(depth, z, cols[:, j])
        return out

    def with_alpha(self, alpha) -> "ModeSolution":
        alpha = np.broadcast_to(np.asarray(alpha, dtype=float), self.k.shape).copy()
        if np.any(alpha < 0):
            raise InputError("modal attenuation must be >= 0")
        return ModeSolution(self.frequency, self.grid, self.k, self.psi, alpha,
                            self.group_speed, self.rho)

    def table_csv(self) -> str:
        out = io.StringIO()
        out.write("m,k_rm,group_speed,alpha_m\n")
        for i in range(self.n_modes):
            row = (self.k[i], self.group_speed[i], self.alpha[i])
            out.write(f"{i + 1}," + ",".join(repr(float(v)) for v in row) + "\n")
        return out.getvalue()

    def eigenfunctions_csv(self) -> str:
        out = io.StringIO()
        out.write("depth_m," + ",".join(f"psi_{i + 1}" for i in range(self.n_modes)) + "\n")
        for zi, row in zip(self.z, self.psi):
            out.write(repr(float(zi)) + "," + ",".join(repr(float(v)) for v in row) + "\n")
        return out.getvalue()


def _operator(profile, omega, grid):
    n = grid.n_intervals
    dz = grid.spacing
    z = grid.z[1:-1]
    c = interpolate_speed(profile, z)
    diag = (omega / c) ** 2 - 2.0 / dz**2
    off = np.full(n - 2, 1.0 / dz**2)
    return diag, off


def _top_eigenvalues(diag, off, kmin2, max_modes):
    lam = eigh_tridiagonal(diag, off, eigvals_only=True, select="v",
                           select_range=(kmin2, np.inf), lapack_driver="stebz")
    lam = np.sort(lam)[::-1]
    if max_modes is not None:
        lam = lam[:max_modes]
    return lam


def _top_by_index(diag, off, count):
    n = diag.size
    lam = eigh_tridiagonal(diag, off, eigvals_only=True, select="i",
                           select_range=(n - count, n - 1), lapack_driver="stebz")
    return np.sort(lam)[::-1]


def _extrapolate(profile, omega, grid, lam, levels):
    row = [lam]
    for level in range(1, levels + 1):
        d, e = _operator(profile, omega, grid.refined(level))
        new = [_top_by_index(d, e, lam.size)]
        for j, prev in enumerate(row, start=1):
            new.append(new[-1] + (new[-1] - prev) / (4.0**j - 1.0))
        row = new
    return row[-1]


def _inverse_iteration(diag, off, lams):
    n = diag.size
    ab = np.zeros((3, n))
    ab[0, 1:] = off
    ab[2, :-1] = off
    scale = np.abs(diag).max() + 2 * np.abs(off).max()
    start = 1.0 + 0.1 * np.cos(np.arange(n) * 0.7)
    vecs = np.empty((n, lams.size))
    for j, lam in enumerate(lams):
        ab[1] = diag - lam - 1e-13 * scale
        x = start / np.linalg.norm(start)
        for _ in range(3):
            x = solve_banded((1, 1), ab, x, check_finite=False)
            # reorthogonalize against near-degenerate neighbours
            for i in range(j):
                if abs(lams[i] - lam) < 1e-9 * scale:
                    x -= vecs[:, i] * (vecs[:, i] @ x)
            x /= np.linalg.norm(x)
        vecs[:, j] = x
    return vecs


def _fix_sign(psi):
    """Flip columns so that the first significant extremum is positive."""
    for j in range(psi.shape[1]):
        col = psi[:, j]
        mag = np.abs(col)
        big = mag >= 0.01 * mag.max()
        inner = np.nonzero((mag[1:-1] >= mag[:-2]) & (mag[1:-1] >= mag[2:]) & big[1:-1])[0]
        idx = inner[0] + 1 if inner.size else int(np.argmax(mag))
        if col[idx] < 0:
            psi[:, j] = -col
    return psi


def solve_modes(profile: SoundSpeedProfile, frequency: float, grid: DepthGrid,
                max_phase_speed: float | None = None, max_modes: int | None = None,
                rho: float = WATER_DENSITY,
                richardson_levels: int = RICHARDSON_LEVELS) -> ModeSolution:
    """Trapped modes of ``profile`` at ``frequency`` (Hz).

    Parameters
    ----------
    profile : SoundSpeedProfile
    frequency : float
        Hz, > 0.
    grid : DepthGrid
        Must resolve the shortest wavelength with 20 points
        (``dz <= min(c) / (20 f)``).
    max_phase_speed : float, optional
        Modes with phase speed omega/k at or above this are discarded.
        Defaults to the sound speed at the bottom of the grid. Pass
        ``np.inf`` to keep every mode with real k.
    max_modes : int, optional
        Keep only the first ``max_modes`` modes.
    rho : float
        Water density (kg/m^3) used in the normalization.
    richardson_levels : int
        Number of grid halvings combined by extrapolation (0 disables it).

    Raises
    ------
    InputError
        Non-positive frequency or a grid that is too coarse.
    NoModesError
        No mode satisfies the phase-speed filter.
    """
    if not frequency > 0:
        raise InputError("frequency must be positive")
    c_grid = interpolate_speed(profile, grid.z)
    if grid.spacing > c_grid.min() / (POINTS_PER_WAVELENGTH * frequency) * (1 + 1e-9):
        raise InputError(
            f"grid too coarse: dz={grid.spacing:.4g} m > c_min/(20 f)="
            f"{c_grid.min() / (POINTS_PER_WAVELENGTH * frequency):.4g} m"
        )
    if max_phase_speed is None:
        max_phase_speed = float(c_grid[-1])
    omega = 2 * np.pi * frequency
    kmin2 = (omega / max_phase_speed) ** 2 if np.isfinite(max_phase_speed) else 0.0

    diag, off = _operator(profile, omega, grid)
    lam = _top_eigenvalues(diag, off, kmin2, max_modes)
    if lam.size == 0:
        raise NoModesError(f"no propagating modes at {frequency:g} Hz")

    k2 = _extrapolate(profile, omega, grid, lam, richardson_levels)
    keep = int(np.count_nonzero(k2 > kmin2))
    # extrapolated values stay sorted; anything that dropped below the cut is at the tail
    k2 = k2[:keep]
    if keep == 0:
        raise NoModesError(f"no propagating modes at {frequency:g} Hz")

    dz = grid.spacing
    vecs = _inverse_iteration(diag, off, lam[:keep])
    psi = np.zeros((grid.n_intervals + 1, keep))
    psi[1:-1] = vecs * np.sqrt(rho / dz)
    psi = _fix_sign(psi)

    k = np.sqrt(k2)
    # first-order perturbation estimate; group_speed() gives the finite-difference value
    slowness = omega * (psi**2 / (rho * c_grid[:, None] ** 2)).sum(axis=0) * dz / k
    return ModeSolution(float(frequency), grid, k, psi, np.zeros(keep), 1.0 / slowness, rho)


def default_grid(profile: SoundSpeedProfile, frequency: float,
                 depth_max: float = DEFAULT_DEPTH,
                 points_per_wavelength: int = POINTS_PER_WAVELENGTH) -> DepthGrid:
    c_min = float(np.min(interpolate_speed(profile, np.linspace(0, depth_max, 2001))))
    c_min = min(c_min, float(profile.speeds.min()))
    return DepthGrid.for_frequency(depth_max, frequency, c_min, points_per_wavelength)


def group_speed(profile: SoundSpeedProfile, frequency: float, mode_index: int,
                dfreq: float, grid: DepthGrid | None = None,
                max_phase_speed: float | None = None) -> float:
    """Group speed d(omega)/dk of mode ``mode_index`` by a centered difference.

    Both stencil points use the same grid, by default the one required at
    ``frequency + dfreq``.
    """
    if not dfreq > 0:
        raise InputError("invalid stencil: dfreq must be positive")
    if not frequency - dfreq > 0:
        raise InputError("invalid stencil: frequency - dfreq must be positive")
    if grid is None:
        grid = default_grid(profile, frequency + dfreq)
    lo = solve_modes(profile, frequency - dfreq, grid, max_phase_speed)
    hi = solve_modes(profile, frequency + dfreq, grid, max_phase_speed)
    if mode_index > min(lo.n_modes, hi.n_modes) or mode_index < 1:
        raise NumericalError(
            f"mode {mode_index} not present across the stencil "
            f"({lo.n_modes} modes at {frequency - dfreq:g} Hz, "
            f"{hi.n_modes} at {frequency + dfreq:g} Hz)"
        )
    dk = hi.k[mode_index - 1] - lo.k[mode_index - 1]
    return float(2 * np.pi * 2 * dfreq / dk)


def mode_surface_concentration(solution: ModeSolution, mode_index: int,
                               fraction: float = 0.01) -> float:
    """Penetration depth: deepest grid depth where |psi| exceeds ``fraction`` of its peak."""
    psi = np.abs(solution.mode(mode_index).psi)
    above = np.nonzero(psi > fraction * psi.max())[0]
    return float(solution.z[above[-1]])


def orthonormality_error(solution: ModeSolution) -> float:
    """max |(1/rho) int psi_m psi_n dz - delta_mn| with the trapezoid rule."""
    z = solution.z
    psi = solution.psi
    w = np.full(z.size, solution.grid.spacing)
    w[[0, -1]] *= 0.5
    gram = (psi * w[:, None]).T @ psi / solution.rho
    return float(np.abs(gram - np.eye(gram.shape[0])).max())
