"""Collisional-blockade telegraph: one atom or none, never two."""

import os

import numpy as np

from atomtrap import (default_params, detected_fraction, occupancy_histogram,
                      telegraph_signal, threshold_gate)
from atomtrap.fileio import write_series

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

p = default_params()
trace = telegraph_signal(p, duration=600.0, bin_width=0.1, seed=42)
write_series(trace, os.path.join(OUT, "telegraph_trace.csv"))

values, freq = occupancy_histogram(trace)
with open(os.path.join(OUT, "telegraph_hist.csv"), "w") as f:
    f.write("counts_per_bin,n_bins\n")
    for v, n in zip(values, freq):
        f.write(f"{v},{n}\n")

# stationary two-state occupancy: load / (2 load + loss)
p_stat = p.load_rate / (2 * p.load_rate + p.loss_rate)
occ = trace.occupancy.mean()
gates = threshold_gate(trace, 0.5 * (p.background_rate + p.atom_rate),
                       p.background_rate, p.atom_rate)
print(f"occupancy {occ:.3f} (stationary {p_stat:.3f}); "
      f"threshold gating finds {detected_fraction(gates, trace.live_time):.3f}")

spells = np.diff(trace.switch_times)
print(f"mean occupied spell {spells[::2].mean():.2f} s "
      f"(analytic {1/(p.loss_rate + p.load_rate):.2f} s), "
      f"mean empty spell {spells[1::2].mean():.2f} s "
      f"(analytic {1/p.load_rate:.2f} s)")
print(f"count modes near {p.background_rate*trace.bin_width:.0f} and "
      f"{p.atom_rate*trace.bin_width:.0f} per bin; max {trace.counts.max()}")
print(f"wrote {os.path.join(OUT, 'telegraph_trace.csv')}")
