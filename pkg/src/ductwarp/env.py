"""Sound-speed profiles, bathymetry tracks and range-dependent environments.

Depths are positive downward from the sea surface, in meters. Speeds are in
meters per second. All containers are immutable; arrays are stored read-only.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError

SPEED_BOUNDS = (1300.0, 1700.0)
WATER_DENSITY = 1000.0

INTERPOLATIONS = ("piecewise-constant", "linear-blend")


class FormatError(InputError):
    """A CSV input row could not be accepted.

    ``lineno`` is 1-based and refers to the offending line of the input.
    """

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SoundSpeedProfile:
    """Sampled sound speed c(z).

    Parameters
    ----------
    depths : array_like
        Strictly increasing sample depths (m), first depth >= 0.
    speeds : array_like
        Sound speed at each depth (m/s).
    name : str
        Free-text label.
    """

    depths: np.ndarray
    speeds: np.ndarray
    name: str = ""

    def __post_init__(self):
        z = _frozen(self.depths)
        c = _frozen(self.speeds)
        object.__setattr__(self, "depths", z)
        object.__setattr__(self, "speeds", c)
        if z.ndim != 1 or z.shape != c.shape:
            raise InputError("depths and speeds must be 1-D arrays of equal length")
        if z.size < 2:
            raise InputError("a sound-speed profile needs at least 2 samples")
        if not np.all(np.isfinite(z)) or not np.all(np.isfinite(c)):
            raise InputError("profile samples must be finite")
        if z[0] < 0:
            raise InputError("first depth must be >= 0")
        if np.any(np.diff(z) <= 0):
            raise InputError("depths must be strictly increasing")
        lo, hi = SPEED_BOUNDS
        if np.any(c < lo) or np.any(c > hi):
            raise InputError(f"sound speeds must lie within [{lo}, {hi}] m/s")

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.depths.tolist(), self.speeds.tolist()))

    def __call__(self, z):
        return interpolate_speed(self, z)

    def same_as(self, other: "SoundSpeedProfile") -> bool:
        return np.array_equal(self.depths, other.depths) and np.array_equal(
            self.speeds, other.speeds
        )


@dataclass(frozen=True)
class LinearDuct:
    """Surface duct idealized as c(z) = c0 * (1 + a*z) down to ``duct_depth``."""

    c0: float
    a: float
    duct_depth: float

    def __post_init__(self):
        if not (self.c0 > 0 and self.a > 0 and self.duct_depth > 0):
            raise InputError("LinearDuct requires c0 > 0, a > 0 and duct_depth > 0")

    def speed(self, z):
        return self.c0 * (1.0 + self.a * np.asarray(z, dtype=float))

    def to_profile(self, name: str = "linear duct") -> SoundSpeedProfile:
        """Two-sample profile; constant-gradient extension keeps it exactly linear."""
        return SoundSpeedProfile(
            [0.0, self.duct_depth], [self.c0, float(self.speed(self.duct_depth))], name
        )


@dataclass(frozen=True, eq=False)
class BathymetryTrack:
    """Seabed depth along the propagation track."""

    ranges: np.ndarray
    depths: np.ndarray

    def __post_init__(self):
        r = _frozen(self.ranges)
        d = _frozen(self.depths)
        object.__setattr__(self, "ranges", r)
        object.__setattr__(self, "depths", d)
        if r.ndim != 1 or r.shape != d.shape or r.size < 1:
            raise InputError("ranges and depths must be non-empty 1-D arrays of equal length")
        if r[0] != 0:
            raise InputError("bathymetry track must start at range 0")
        if np.any(np.diff(r) <= 0):
            raise InputError("bathymetry ranges must be strictly increasing")
        if np.any(d <= 0):
            raise InputError("bathymetry depths must be positive")

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.ranges.tolist(), self.depths.tolist()))

    def depth_at(self, r):
        return np.interp(r, self.ranges, self.depths)


@dataclass(frozen=True)
class RangeDependentEnv:
    """Profiles at a sequence of ranges, optionally with a seabed track.

    ``stations`` is a sequence of ``(range_m, SoundSpeedProfile)`` pairs with
    strictly increasing ranges.
    """

    stations: tuple
    bathymetry: BathymetryTrack | None = None
    rho: float = WATER_DENSITY
    interpolation: str = "piecewise-constant"

    def __post_init__(self):
        stations = tuple((float(r), p) for r, p in self.stations)
        object.__setattr__(self, "stations", stations)
        if not stations:
            raise InputError("at least one station is required")
        ranges = np.array([r for r, _ in stations])
        if ranges[0] < 0 or np.any(np.diff(ranges) <= 0):
            raise InputError("station ranges must be >= 0 and strictly increasing")
        if not self.rho > 0:
            raise InputError("density must be positive")
        if self.interpolation not in INTERPOLATIONS:
            raise InputError(f"interpolation must be one of {INTERPOLATIONS}")

    @property
    def ranges(self) -> np.ndarray:
        return np.array([r for r, _ in self.stations])

    @classmethod
    def uniform(cls, profile: SoundSpeedProfile, **kwargs) -> "RangeDependentEnv":
        return cls(((0.0, profile),), **kwargs)


# ---------------------------------------------------------------------------
# CSV ingestion


def _parse_pairs(text, what: str, header_words: Sequence[str]):
    if not isinstance(text, str):
        text = text.read()
    rows = []
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != 2:
            raise FormatError(f"expected 2 columns, got {len(cells)}", lineno)
        try:
            x, y = float(cells[0]), float(cells[1])
        except ValueError:
            if not rows and any(w in line.lower() for w in header_words):
                continue
            raise FormatError(f"malformed {what} row {line!r}", lineno) from None
        if not (np.isfinite(x) and np.isfinite(y)):
            raise FormatError("non-finite value", lineno)
        rows.append((lineno, x, y))
    return rows


def parse_ssp(text, name: str = "") -> SoundSpeedProfile:
    """Parse ``depth_m,speed_mps`` rows into a profile.

    A header line, blank lines and ``#`` comments are tolerated. Violations
    of the profile invariants raise :class:`FormatError` carrying the line
    number of the offending row.
    """
    rows = _parse_pairs(text, "sound-speed", ("depth", "speed"))
    lo, hi = SPEED_BOUNDS
    prev = None
    for lineno, z, c in rows:
        if z < 0:
            raise FormatError(f"negative depth {z}", lineno)
        if prev is not None and z <= prev:
            raise FormatError(f"non-monotone depth {z} (previous {prev})", lineno)
        if not lo <= c <= hi:
            raise FormatError(f"speed out of range: {c} m/s not in [{lo}, {hi}]", lineno)
        prev = z
    if len(rows) < 2:
        raise FormatError("a sound-speed profile needs at least 2 samples")
    return SoundSpeedProfile([r[1] for r in rows], [r[2] for r in rows], name)


def serialize_ssp(profile: SoundSpeedProfile, header: bool = True) -> str:
    lines = ["depth_m,speed_mps"] if header else []
    lines += [f"{z!r},{c!r}" for z, c in profile.samples]
    return "\n".join(lines) + "\n"


def parse_bathymetry(text) -> BathymetryTrack:
    """Parse ``range_m,depth_m`` rows into a bathymetry track."""
    rows = _parse_pairs(text, "bathymetry", ("range", "depth"))
    prev = None
    for lineno, r, d in rows:
        if prev is None and r != 0:
            raise FormatError("track must start at range 0", lineno)
        if prev is not None and r <= prev:
            raise FormatError(f"non-monotone range {r} (previous {prev})", lineno)
        if d <= 0:
            raise FormatError(f"seabed depth must be positive, got {d}", lineno)
        prev = r
    if not rows:
        raise FormatError("empty bathymetry track")
    return BathymetryTrack([r[1] for r in rows], [r[2] for r in rows])


def serialize_bathymetry(track: BathymetryTrack, header: bool = True) -> str:
    lines = ["range_m,depth_m"] if header else []
    lines += [f"{r!r},{d!r}" for r, d in track.points]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Evaluation


def interpolate_speed(profile: SoundSpeedProfile, z):
    """Sound speed at depth(s) ``z``.

    Piecewise linear between samples. Above the first sample the first value
    is held; below the deepest sample the last segment's gradient continues.
    """
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise InputError("depth must be >= 0")
    zs, cs = profile.depths, profile.speeds
    c = np.interp(z, zs, cs)
    grad = (cs[-1] - cs[-2]) / (zs[-1] - zs[-2])
    deep = z > zs[-1]
    if np.any(deep):
        c = np.where(deep, cs[-1] + grad * (z - zs[-1]), c)
    return c if c.ndim else float(c)


def fit_linear_duct(profile: SoundSpeedProfile, depth_limit: float) -> LinearDuct:
    """Least-squares fit of c(z) = c0 (1 + a z) to samples with z <= depth_limit."""
    if not depth_limit > 0:
        raise InputError("depth_limit must be positive")
    sel = profile.depths <= depth_limit
    if np.count_nonzero(sel) < 2:
        raise InputError("fewer than 2 profile samples within the depth limit")
    slope, c0 = np.polyfit(profile.depths[sel], profile.speeds[sel], 1)
    a = slope / c0
    if not a > 0:
        raise InputError(f"fitted gradient a={a:.3g} <= 0: not a surface duct")
    return LinearDuct(float(c0), float(a), float(depth_limit))


def _blend(p0: SoundSpeedProfile, p1: SoundSpeedProfile, w: float, name: str):
    z = np.union1d(p0.depths, p1.depths)
    c = (1.0 - w) * interpolate_speed(p0, z) + w * interpolate_speed(p1, z)
    return SoundSpeedProfile(z, c, name)


def env_at_range(env: RangeDependentEnv, r: float) -> SoundSpeedProfile:
    """Profile in effect at range ``r`` (m)."""
    ranges = env.ranges
    if len(env.stations) == 1:
        if r < 0:
            raise InputError("range must be >= 0")
        return env.stations[0][1]
    if not ranges[0] <= r <= ranges[-1]:
        raise InputError(
            f"range {r} m outside station track [{ranges[0]}, {ranges[-1]}]"
        )
    i = int(np.searchsorted(ranges, r, side="right")) - 1
    if env.interpolation == "piecewise-constant" or i == len(ranges) - 1:
        return env.stations[i][1]
    r0, p0 = env.stations[i]
    r1, p1 = env.stations[i + 1]
    w = (r - r0) / (r1 - r0)
    if w == 0.0:
        return p0
    return _blend(p0, p1, w, f"blend@{r:g}m")


def station_nodes(env: RangeDependentEnv, r: float) -> np.ndarray:
    """Ranges in ``[0, r]`` where the environment changes, plus both endpoints."""
    inner = env.ranges[(env.ranges > 0) & (env.ranges < r)]
    return np.unique(np.concatenate(([0.0], inner, [float(r)])))


def load_profile(path, name: str | None = None) -> SoundSpeedProfile:
    with open(path, encoding="utf-8") as fh:
        return parse_ssp(fh, name if name is not None else str(path))


def load_bathymetry(path) -> BathymetryTrack:
    with open(path, encoding="utf-8") as fh:
        return parse_bathymetry(fh)
