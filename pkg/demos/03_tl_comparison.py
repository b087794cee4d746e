"""Transmission loss in a single surface duct versus a two-channel profile.

Both profiles share the deep water; they differ in the upper few hundred
metres. The printout shows where in depth the two fields disagree.
"""

from pathlib import Path

import numpy as np

from ductwarp.env import load_profile
from ductwarp.synth import transmission_loss_map

DATA = Path(__file__).resolve().parents[1] / "src" / "ductwarp" / "data"
ice = load_profile(DATA / "central_ice.csv", "central ice")
dual = load_profile(DATA / "chukchi_dual.csv", "dual channel")

ranges = np.arange(1e3, 50e3 + 1, 500.0)
depths = np.arange(5.0, 1000.0, 5.0)
a = transmission_loss_map(ice, 100.0, 60.0, ranges, depths)
b = transmission_loss_map(dual, 100.0, 60.0, ranges, depths)
diff = np.abs(a.tl - b.tl)

print("Mean |TL difference| at 100 Hz, source at 60 m, 1-50 km")
for lo, hi in ((0, 100), (100, 200), (200, 400), (400, 700), (700, 1000)):
    rows = (depths >= lo) & (depths < hi)
    print(f"  {lo:4d}-{hi:<4d} m: {diff[rows].mean():5.2f} dB")
print(f"\nabove 400 m: {diff[depths < 400].mean():.2f} dB, below: {diff[depths > 400].mean():.2f} dB")

out = Path("tl_central_ice.csv")
out.write_text(a.to_csv())
print(f"central-ice map written to {out.resolve()}")
