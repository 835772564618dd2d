"""Dipole trap numbers vs beam power at fixed waist and wavelength."""

import os

import numpy as np

from atomtrap import TrapBeam, default_params, photon_scattering_rate, trap_depth
from atomtrap.trap import effective_rabi, trap_report

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

params = default_params()
beam = TrapBeam(power=44e-3, waist=3.5e-6, wavelength=856e-9)

print("reference beam (44 mW, 3.5 um, 856 nm):")
for k, v in trap_report(beam, params).items():
    print(f"  {k} = {v:.4f}")

powers = np.linspace(5e-3, 80e-3, 16)
rows = []
for p in powers:
    b = TrapBeam(power=p, waist=beam.waist, wavelength=beam.wavelength)
    u = trap_depth(b)
    rows.append((p * 1e3, u, photon_scattering_rate(b),
                 effective_rabi(u, params) / (2 * np.pi * 1e6)))

path = os.path.join(OUT, "trap_vs_power.csv")
with open(path, "w") as f:
    f.write("power_mw,depth_mk,scatter_per_s,effective_rabi_mhz\n")
    for r in rows:
        f.write(",".join(f"{x:.6g}" for x in r) + "\n")
print(f"wrote {path}")
