"""Normal-mode propagation in linear surface ducts and warping-based mode separation."""

from .env import (BathymetryTrack, LinearDuct, RangeDependentEnv, SoundSpeedProfile,
                  env_at_range, fit_linear_duct, interpolate_speed, load_bathymetry,
                  load_profile, parse_bathymetry, parse_ssp)
from .errors import CutoffError, DuctWarpError, InputError, NoModesError, NumericalError
from .modes import (DepthGrid, ModeSolution, default_grid, group_speed,
                    mode_surface_concentration, solve_modes)
from .synth import (Geometry, ModeProvider, SolverConfig, SourcePulse, Waveform,
                    dispersion_skeleton, synthesize_waveform, transmission_loss_map)
from .warp import (ModeBand, Spectrogram, WarpPlan, estimate_tr, extract_dispersion,
                   mode_bands, separate_modes, stft, unwarp_signal, warp_signal)

__version__ = "0.1.0"

__all__ = [
    "BathymetryTrack", "CutoffError", "DepthGrid", "DuctWarpError", "Geometry", "InputError",
    "LinearDuct", "ModeBand", "ModeProvider", "ModeSolution", "NoModesError", "NumericalError",
    "RangeDependentEnv", "SolverConfig", "SoundSpeedProfile", "SourcePulse", "Spectrogram",
    "WarpPlan", "Waveform", "default_grid", "dispersion_skeleton", "env_at_range",
    "estimate_tr", "extract_dispersion", "fit_linear_duct", "group_speed", "interpolate_speed",
    "load_bathymetry", "load_profile", "mode_bands", "mode_surface_concentration",
    "parse_bathymetry", "parse_ssp", "separate_modes", "solve_modes", "stft",
    "synthesize_waveform", "transmission_loss_map", "unwarp_signal", "warp_signal",
]
