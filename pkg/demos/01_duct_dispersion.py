"""How a linear surface duct disperses sound.

Starting from a measured-style profile we fit the duct, compare the closed
form wavenumbers with the numerical solver, and print the arrival time of
each mode across the band. Run with ``python demos/01_duct_dispersion.py``.
"""

from pathlib import Path

import numpy as np

from ductwarp import wkb
from ductwarp.env import fit_linear_duct, load_profile
from ductwarp.modes import default_grid, mode_surface_concentration, solve_modes

DATA = Path(__file__).resolve().parents[1] / "src" / "ductwarp" / "data"

ice = load_profile(DATA / "central_ice.csv", "central ice")
duct = fit_linear_duct(ice, 400.0)
print(f"Fitted duct: c0 = {duct.c0:.1f} m/s, a = {duct.a:.4e} 1/m over {duct.duct_depth:.0f} m\n")

# Only a handful of modes fit inside the duct; the rest leak into deeper water
# where the straight-line profile no longer applies.
f = 100.0
omega = 2 * np.pi * f
sol = solve_modes(ice, f, default_grid(ice, f), max_modes=10)
print(f"Wavenumbers at {f:g} Hz")
print("  m   closed form    solver        rel. gap   turning depth")
for m in range(1, 11):
    k_cf = float(wkb.k_exact_form(duct, m, omega))
    gap = abs(k_cf - sol.k[m - 1]) / sol.k[m - 1]
    eps = float(wkb.turning_depth(duct, m, omega))
    print(f"{m:3d}   {k_cf:.7f}   {sol.k[m - 1]:.7f}   {gap:.2e}   {eps:7.1f} m")

# Energy hugs the surface more tightly as frequency goes up.
print("\nDepth holding 90% of mode 1 energy")
for f in (40.0, 70.0, 100.0):
    s = solve_modes(ice, f, default_grid(ice, f), max_modes=1)
    print(f"  {f:5.0f} Hz: {mode_surface_concentration(s, 1):6.1f} m")

# Low frequencies of every mode arrive first; all modes pile up near r/c0.
r = 105e3
t_r = float(wkb.arrival_time(duct, r))
print(f"\nGroup delays at {r / 1e3:.0f} km, relative to t_r = {t_r:.3f} s")
freqs = np.array([10.0, 20.0, 50.0, 100.0])
for m in (1, 2, 3):
    t = wkb.modal_group_delay(duct, m, 2 * np.pi * freqs, r)
    cells = "  ".join(f"{x:+.3f}" for x in t - t_r)
    print(f"  mode {m}: {cells}  (s at {', '.join(f'{v:g}' for v in freqs)} Hz)")
