"""Command-line front end.

Every subcommand writes its artifacts into ``--out`` together with a
``manifest.json`` that lists the inputs (with content hashes), the parameter
values and the sha256 of each output. Exit status is 0 on success, 1 for bad
input and 2 when a numerical stage fails.

Scenario files are INI-style text: ``[section]`` headers followed by
``key = value`` lines, ``#`` comments allowed. Recognised sections and keys::

    [environment]  ssp (comma list), station_ranges (comma list, m),
                   bathymetry (optional), interpolation
    [geometry]     source_depth, receiver_depth, range
    [pulse]        f_lo, f_hi, shape, taper
    [solver]       depth_max, points_per_wavelength, max_modes, max_phase_speed
    [synthesis]    sample_rate, duration, t0
    [warp]         t_r (nominal | estimate | seconds), oversample, modes,
                   fit_depth, halfwidth_fraction
    [stft]         window_len, hop, threshold
    [outputs]      directory, artifacts (comma list drawn from
                   waveform, spectrogram, modes, dispersion)

Relative file names resolve against the scenario file's directory.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fileio, wkb
from .env import (LinearDuct, RangeDependentEnv, env_at_range, fit_linear_duct,
                  interpolate_speed, load_bathymetry, load_profile)
from .errors import InputError, NumericalError
from .modes import default_grid, solve_modes
from .synth import (Geometry, SolverConfig, SourcePulse, dispersion_skeleton, synthesize_waveform,
                    transmission_loss_map)
from .warp import (WarpPlan, estimate_tr, extract_dispersion, mode_bands, separate_modes, stft,
                   warp_signal, warped_spectrum)

log = logging.getLogger("ductwarp")

ARTIFACTS = ("waveform", "spectrogram", "modes", "dispersion")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(f"{self.prog}: {message}")


class Run:
    """Collects inputs, parameters and outputs of one invocation."""

    def __init__(self, command: str, out: Path):
        self.command = command
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.inputs: dict[str, str] = {}
        self.params: dict[str, object] = {}
        self.outputs: list[Path] = []

    def add_input(self, path):
        if path is not None:
            self.inputs[str(path)] = fileio.sha256_file(path)

    def write_text(self, name: str, text: str) -> Path:
        path = self.out / name
        path.write_text(text, encoding="utf-8")
        self.outputs.append(path)
        return path

    def write_bytes(self, name: str, data: bytes) -> Path:
        path = self.out / name
        path.write_bytes(data)
        self.outputs.append(path)
        return path

    def write_waveform(self, name: str, w) -> None:
        self.outputs.extend(fileio.write_waveform(self.out / name, w))

    def finish(self) -> Path:
        manifest = {
            "command": self.command,
            "inputs": dict(sorted(self.inputs.items())),
            "parameters": _jsonable(self.params),
            "outputs": {p.name: fileio.sha256_file(p) for p in sorted(self.outputs)},
        }
        path = self.out / "manifest.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError:
        raise InputError(f"expected a comma-separated list of integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError:
        raise InputError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _axis(text: str) -> np.ndarray:
    """``start:stop:step`` (inclusive stop) or a comma list."""
    if ":" in text:
        try:
            start, stop, step = (float(v) for v in text.split(":"))
        except ValueError:
            raise InputError(f"malformed axis {text!r}; expected start:stop:step") from None
        if step <= 0 or stop < start:
            raise InputError(f"axis {text!r} needs step > 0 and stop >= start")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return start + step * np.arange(n)
    return np.array(_float_list(text))


def _table_csv(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(v) if isinstance(v, (int, np.integer)) else repr(float(v))
                              for v in row))
    return "\n".join(lines) + "\n"


def _spectrum_csv(f, esd) -> str:
    return _table_csv(("f_hz", "esd"), zip(f, esd))


# ---------------------------------------------------------------------------
# Subcommands


def cmd_fit_duct(args, run: Run):
    profile = load_profile(args.ssp)
    run.add_input(args.ssp)
    run.params.update(depth_limit=args.depth_limit)
    duct = fit_linear_duct(profile, args.depth_limit)
    text = _table_csv(("c0", "a", "duct_depth"), [(duct.c0, duct.a, duct.duct_depth)])
    run.write_text("duct.csv", text)
    print(f"c0 = {duct.c0!r} m/s")
    print(f"a = {duct.a!r} 1/m")


def _solver_profile(args):
    if args.ssp:
        return load_profile(args.ssp)
    return LinearDuct(args.c0, args.a, args.duct_depth).to_profile()


def cmd_modes(args, run: Run):
    profile = load_profile(args.ssp)
    run.add_input(args.ssp)
    run.params.update(freq=args.freq, depth_max=args.depth_max, ppw=args.ppw,
                      max_modes=args.max_modes, max_phase_speed=args.max_phase_speed)
    grid = default_grid(profile, args.freq, args.depth_max, args.ppw)
    sol = solve_modes(profile, args.freq, grid, args.max_phase_speed, args.max_modes)
    run.write_text("modes.csv", sol.table_csv())
    run.write_text("eigenfunctions.csv", sol.eigenfunctions_csv())
    print(f"{sol.n_modes} modes at {args.freq:g} Hz")


def cmd_wkb_table(args, run: Run):
    duct = LinearDuct(args.c0, args.a, args.duct_depth)
    profile = _solver_profile(args)
    run.add_input(args.ssp)
    run.params.update(c0=args.c0, a=args.a, duct_depth=args.duct_depth, modes=args.modes,
                      freq=args.freq, depth_max=args.depth_max)
    omega = 2 * np.pi * args.freq
    grid = default_grid(profile, args.freq, args.depth_max)
    sol = solve_modes(profile, args.freq, grid, np.inf, args.modes)
    rows = []
    for m in range(1, args.modes + 1):
        k_num = sol.k[m - 1] if m <= sol.n_modes else np.nan
        k_sq = float(wkb.k_exact_form(duct, m, omega))
        k_lin = float(wkb.k_linearized(duct, m, omega))
        rows.append((m, k_sq, k_lin, k_num, abs(k_sq - k_num) / k_num))
    text = _table_csv(("m", "k_exact_form", "k_linearized", "k_solver", "rel_gap"), rows)
    run.write_text("wkb_table.csv", text)
    sys.stdout.write(text)


def cmd_tl(args, run: Run):
    profile = load_profile(args.ssp)
    run.add_input(args.ssp)
    ranges, depths = _axis(args.ranges), _axis(args.depths)
    run.params.update(freq=args.freq, source_depth=args.zs, ranges=args.ranges,
                      depths=args.depths, depth_max=args.depth_max)
    cfg = SolverConfig(depth_max=args.depth_max)
    tl = transmission_loss_map(profile, args.freq, args.zs, ranges, depths, cfg)
    run.write_text("tl.csv", tl.to_csv())


def cmd_synth(args, run: Run):
    profile = load_profile(args.ssp)
    run.add_input(args.ssp)
    modes = _int_list(args.modes) if args.modes else None
    run.params.update(source_depth=args.zs, receiver_depth=args.zr, range=args.range,
                      f_lo=args.f_lo, f_hi=args.f_hi, taper=args.taper, sample_rate=args.fs,
                      duration=args.duration, modes=modes, max_modes=args.max_modes,
                      t0=args.t0)
    w = synthesize_waveform(profile, Geometry(args.zs, args.zr, args.range),
                            SourcePulse(args.f_lo, args.f_hi, taper=args.taper),
                            args.fs, args.duration,
                            config=SolverConfig(depth_max=args.depth_max, max_modes=args.max_modes),
                            modes=modes, t0=args.t0)
    run.write_waveform("waveform.f32", w)


def _t_r(args, w) -> float:
    if args.t_r is not None:
        return args.t_r
    if args.range is None:
        raise InputError("give --t-r or --range (with --c0)")
    return estimate_tr(w if args.refine_tr else None, args.range, args.c0)


def cmd_warp(args, run: Run):
    w = fileio.read_waveform(args.waveform)
    run.add_input(args.waveform)
    t_r = _t_r(args, w)
    run.params.update(t_r=t_r, oversample=args.oversample)
    warped = warp_signal(w, WarpPlan(t_r, args.oversample))
    run.write_waveform("warped.f32", warped)
    run.write_text("warped_spectrum.csv", _spectrum_csv(*warped_spectrum(warped)))


def cmd_separate(args, run: Run):
    w = fileio.read_waveform(args.waveform)
    run.add_input(args.waveform)
    t_r = _t_r(args, w)
    modes = _int_list(args.modes)
    r = args.range if args.range is not None else t_r * args.c0
    duct = LinearDuct(args.c0, args.a, args.duct_depth)
    run.params.update(t_r=t_r, range=r, c0=args.c0, a=args.a, modes=modes,
                      oversample=args.oversample, window_len=args.window, hop=args.hop)
    seps = separate_modes(w, WarpPlan(t_r, args.oversample), mode_bands(duct, r, modes),
                          window_len=args.window, hop=args.hop)
    rows = []
    for s in seps:
        run.write_waveform(f"mode_{s.m}.f32", s.waveform)
        rows.append(fileio.ridge_rows(s.m, s.curve))
        print(f"mode {s.m}: {'present' if s.present else 'absent'} "
              f"(band energy fraction {s.energy_fraction:.3g})")
    run.write_text("dispersion.csv", fileio.dispersion_csv(np.vstack(rows)))


def cmd_dispersion(args, run: Run):
    duct = LinearDuct(args.c0, args.a, args.duct_depth)
    modes = _int_list(args.modes)
    run.params.update(c0=args.c0, a=args.a, range=args.range, modes=modes,
                      f_lo=args.f_lo, f_hi=args.f_hi)
    skel = dispersion_skeleton(duct, args.range, modes, (args.f_lo, args.f_hi))
    run.write_text("skeleton.csv", fileio.dispersion_csv(skel))
    if args.waveform:
        w = fileio.read_waveform(args.waveform)
        run.add_input(args.waveform)
        run.params.update(window_len=args.window, hop=args.hop, threshold=args.threshold)
        sg = stft(w, args.window, args.hop)
        run.write_text("spectrogram.csv", sg.to_csv())
        run.write_bytes("spectrogram.pgm", fileio.spectrogram_pgm(sg))
        ridge = extract_dispersion(sg, args.threshold)
        run.write_text("ridge.csv", fileio.dispersion_csv(fileio.ridge_rows(0, ridge)))


# ---------------------------------------------------------------------------
# Scenarios


@dataclass
class Scenario:
    """Everything needed for one end-to-end synthetic run."""

    env: RangeDependentEnv
    inputs: list[Path]
    geometry: Geometry
    pulse: SourcePulse
    solver: SolverConfig
    sample_rate: float
    duration: float
    t0: float | None
    t_r: str
    oversample: float
    modes: list[int]
    fit_depth: float
    halfwidth_fraction: float
    window_len: int
    hop: int
    threshold: float
    directory: Path
    artifacts: tuple = ARTIFACTS
    params: dict = field(default_factory=dict)


def _get(cp, section, key, conv=str, default=None):
    if not cp.has_option(section, key):
        if default is None:
            raise InputError(f"scenario is missing [{section}] {key}")
        return default
    raw = cp.get(section, key)
    try:
        return conv(raw)
    except ValueError:
        raise InputError(f"[{section}] {key}: cannot parse {raw!r}") from None


def _opt(cp, section, key, conv):
    """Optional key; absent or ``none`` gives None."""
    if not cp.has_option(section, key) or cp.get(section, key).strip().lower() in ("", "none"):
        return None
    return _get(cp, section, key, conv)


def load_scenario(path) -> Scenario:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"cannot read scenario file {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        cp.read_string(path.read_text(encoding="utf-8"), source=str(path))
    except configparser.Error as exc:
        raise InputError(f"malformed scenario file: {exc}") from None
    base = path.parent

    ssp_files = [base / s.strip() for s in _get(cp, "environment", "ssp").split(",") if s.strip()]
    ranges = _float_list(_get(cp, "environment", "station_ranges", str, "0"))
    if len(ranges) != len(ssp_files):
        raise InputError("station_ranges must list one range per ssp file")
    for p in ssp_files:
        if not p.is_file():
            raise InputError(f"profile file not found: {p}")
    inputs = [path, *ssp_files]
    bathy = None
    if cp.has_option("environment", "bathymetry"):
        bpath = base / cp.get("environment", "bathymetry")
        if not bpath.is_file():
            raise InputError(f"bathymetry file not found: {bpath}")
        bathy = load_bathymetry(bpath)
        inputs.append(bpath)
    env = RangeDependentEnv(tuple(zip(ranges, (load_profile(p, p.name) for p in ssp_files))),
                            bathymetry=bathy,
                            interpolation=_get(cp, "environment", "interpolation", str,
                                               "piecewise-constant"))

    geometry = Geometry(_get(cp, "geometry", "source_depth", float),
                        _get(cp, "geometry", "receiver_depth", float),
                        _get(cp, "geometry", "range", float))
    pulse = SourcePulse(_get(cp, "pulse", "f_lo", float), _get(cp, "pulse", "f_hi", float),
                        _get(cp, "pulse", "shape", str, "raised-cosine-band"),
                        _get(cp, "pulse", "taper", float, 0.1))
    solver = SolverConfig(
        depth_max=_get(cp, "solver", "depth_max", float, 2000.0),
        points_per_wavelength=_get(cp, "solver", "points_per_wavelength", int, 20),
        max_phase_speed=_opt(cp, "solver", "max_phase_speed", float),
        max_modes=_opt(cp, "solver", "max_modes", int),
    )
    artifacts = tuple(a.strip() for a in _get(cp, "outputs", "artifacts", str,
                                              ",".join(ARTIFACTS)).split(",") if a.strip())
    unknown = set(artifacts) - set(ARTIFACTS)
    if unknown:
        raise InputError(f"unknown artifacts {sorted(unknown)}; choose from {ARTIFACTS}")
    directory = Path(_get(cp, "outputs", "directory", str, "scenario_out"))
    sc = Scenario(
        env=env, inputs=inputs, geometry=geometry, pulse=pulse, solver=solver,
        sample_rate=_get(cp, "synthesis", "sample_rate", float),
        duration=_get(cp, "synthesis", "duration", float),
        t0=_opt(cp, "synthesis", "t0", float),
        t_r=_get(cp, "warp", "t_r", str, "nominal").strip().lower(),
        oversample=_get(cp, "warp", "oversample", float, 4.0),
        modes=_int_list(_get(cp, "warp", "modes", str, "1,2,3")),
        fit_depth=_get(cp, "warp", "fit_depth", float, 400.0),
        halfwidth_fraction=_get(cp, "warp", "halfwidth_fraction", float, 0.4),
        window_len=_get(cp, "stft", "window_len", int, 256),
        hop=_get(cp, "stft", "hop", int, 16),
        threshold=_get(cp, "stft", "threshold", float, 0.2),
        directory=directory if directory.is_absolute() else base / directory,
        artifacts=artifacts,
    )
    sc.params = {s: dict(cp.items(s)) for s in cp.sections()}
    return sc


def run_scenario(sc: Scenario, run: Run) -> dict:
    """Synthesize, warp, separate and extract dispersion; return a summary."""
    for p in sc.inputs:
        run.add_input(p)
    run.params.update(sc.params)
    env = sc.env
    source = env.stations[0][1] if len(env.stations) == 1 else env
    w = synthesize_waveform(source, sc.geometry, sc.pulse, sc.sample_rate, sc.duration,
                            config=sc.solver, t0=sc.t0)
    rx_profile = env_at_range(env, sc.geometry.r)
    c_surface = float(interpolate_speed(rx_profile, 0.0))
    if sc.t_r == "nominal":
        t_r = sc.geometry.r / c_surface
    elif sc.t_r == "estimate":
        t_r = estimate_tr(w, sc.geometry.r, c_surface, oversample=sc.oversample)
    else:
        try:
            t_r = float(sc.t_r)
        except ValueError:
            raise InputError(f"[warp] t_r must be nominal, estimate or seconds, got {sc.t_r!r}") from None
    duct = fit_linear_duct(rx_profile, sc.fit_depth)
    summary = {"t_r": t_r, "c0": duct.c0, "a": duct.a}

    if "waveform" in sc.artifacts:
        run.write_waveform("waveform.f32", w)
    if "spectrogram" in sc.artifacts:
        sg = stft(w, sc.window_len, sc.hop)
        run.write_text("spectrogram.csv", sg.to_csv())
        run.write_bytes("spectrogram.pgm", fileio.spectrogram_pgm(sg))
    plan = WarpPlan(t_r, sc.oversample)
    bands = mode_bands(duct, sc.geometry.r, sc.modes, sc.halfwidth_fraction)
    seps = separate_modes(w, plan, bands, window_len=sc.window_len, hop=sc.hop,
                          threshold_fraction=sc.threshold)
    if "modes" in sc.artifacts:
        warped = warp_signal(w, plan)
        run.write_text("warped_spectrum.csv", _spectrum_csv(*warped_spectrum(warped)))
        for s in seps:
            if s.present:
                run.write_waveform(f"mode_{s.m}.f32", s.waveform)
    if "dispersion" in sc.artifacts:
        ridges = [fileio.ridge_rows(s.m, s.curve) for s in seps if s.present]
        run.write_text("dispersion.csv",
                       fileio.dispersion_csv(np.vstack(ridges) if ridges else np.empty((0, 3))))
        skel = dispersion_skeleton(duct, sc.geometry.r, sc.modes, (sc.pulse.f_lo, sc.pulse.f_hi))
        run.write_text("skeleton.csv", fileio.dispersion_csv(skel))
    summary["present"] = [s.m for s in seps if s.present]
    summary["absent"] = [s.m for s in seps if not s.present]
    return summary


def cmd_scenario(args, run: Run | None):
    sc = load_scenario(args.config)
    out = Path(args.out) if args.out else sc.directory
    run = Run("scenario run", out)
    summary = run_scenario(sc, run)
    run.finish()
    print(f"t_r = {summary['t_r']:.6f} s, duct c0 = {summary['c0']:.3f} m/s, a = {summary['a']:.4g} 1/m")
    print(f"modes present: {summary['present']}; absent: {summary['absent']}")
    print(f"artifacts written to {out}")


# ---------------------------------------------------------------------------
# Parser


def _duct_args(p, required=True):
    p.add_argument("--c0", type=float, required=required, help="surface sound speed (m/s)")
    p.add_argument("--a", type=float, required=required, help="relative gradient (1/m)")
    p.add_argument("--duct-depth", type=float, default=400.0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ductwarp", description="Surface-duct modal propagation and warping.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        if name != "scenario":
            p.add_argument("--out", default="ductwarp_out", help="output directory")
        return p

    p = add("fit-duct", cmd_fit_duct, "least-squares linear duct fit")
    p.add_argument("--ssp", required=True)
    p.add_argument("--depth-limit", type=float, required=True)

    p = add("modes", cmd_modes, "normal modes at one frequency")
    p.add_argument("--ssp", required=True)
    p.add_argument("--freq", type=float, required=True)
    p.add_argument("--depth-max", type=float, default=2000.0)
    p.add_argument("--ppw", type=int, default=20)
    p.add_argument("--max-modes", type=int)
    p.add_argument("--max-phase-speed", type=float)

    p = add("wkb-table", cmd_wkb_table, "closed-form vs numerical wavenumbers")
    _duct_args(p)
    p.add_argument("--modes", type=int, default=7)
    p.add_argument("--freq", type=float, required=True)
    p.add_argument("--ssp", help="profile for the numerical solve (default: the linear duct)")
    p.add_argument("--depth-max", type=float, default=2000.0)

    p = add("tl", cmd_tl, "transmission-loss map")
    p.add_argument("--ssp", required=True)
    p.add_argument("--freq", type=float, required=True)
    p.add_argument("--zs", type=float, required=True)
    p.add_argument("--ranges", required=True, help="start:stop:step or comma list (m)")
    p.add_argument("--depths", required=True, help="start:stop:step or comma list (m)")
    p.add_argument("--depth-max", type=float, default=2000.0)

    p = add("synth", cmd_synth, "broadband waveform synthesis")
    p.add_argument("--ssp", required=True)
    p.add_argument("--zs", type=float, required=True)
    p.add_argument("--zr", type=float, required=True)
    p.add_argument("--range", type=float, required=True)
    p.add_argument("--f-lo", type=float, required=True)
    p.add_argument("--f-hi", type=float, required=True)
    p.add_argument("--fs", type=float, required=True)
    p.add_argument("--duration", type=float, required=True)
    p.add_argument("--taper", type=float, default=0.1,
                   help="raised-cosine edge width as a fraction of the band")
    p.add_argument("--modes", help="comma list of mode numbers (default: all)")
    p.add_argument("--max-modes", type=int)
    p.add_argument("--depth-max", type=float, default=2000.0)
    p.add_argument("--t0", type=float)

    for name, func, help_ in (("warp", cmd_warp, "time-warp a waveform"),
                              ("separate", cmd_separate, "warping-based mode separation")):
        p = add(name, func, help_)
        p.add_argument("--waveform", required=True)
        p.add_argument("--t-r", type=float)
        p.add_argument("--range", type=float)
        p.add_argument("--refine-tr", action="store_true",
                       help="refine t_r on the signal by warped-spectrum concentration")
        p.add_argument("--oversample", type=float, default=4.0)
        if name == "separate":
            _duct_args(p)
            p.add_argument("--modes", default="1,2,3")
            p.add_argument("--window", type=int, default=256)
            p.add_argument("--hop", type=int, default=16)
        else:
            p.add_argument("--c0", type=float, default=1434.0)

    p = add("dispersion", cmd_dispersion, "dispersion skeleton and spectrogram ridge")
    _duct_args(p)
    p.add_argument("--range", type=float, required=True)
    p.add_argument("--modes", default="1,2,3")
    p.add_argument("--f-lo", type=float, default=10.0)
    p.add_argument("--f-hi", type=float, default=100.0)
    p.add_argument("--waveform")
    p.add_argument("--window", type=int, default=256)
    p.add_argument("--hop", type=int, default=16)
    p.add_argument("--threshold", type=float, default=0.1)

    p = add("scenario", cmd_scenario, "run a scenario file")
    p.add_argument("action", choices=["run"])
    p.add_argument("config")
    p.add_argument("--out", help="override [outputs] directory")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(format="%(levelname)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        if args.verbose:
            logging.getLogger().setLevel(logging.INFO)
        if args.func is cmd_scenario:
            cmd_scenario(args, None)
        else:
            run = Run(args.command, Path(args.out))
            run.params["command"] = args.command
            args.func(args, run)
            run.finish()
    except NumericalError as exc:
        print(f"ductwarp: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (InputError, ValueError, OSError) as exc:
        print(f"ductwarp: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
