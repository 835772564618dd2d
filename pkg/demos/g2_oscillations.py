"""Intensity correlation at two trap depths: the bunching oscillation
frequency tracks the light-shifted generalized Rabi frequency."""

import os

import numpy as np

from atomtrap import apply_envelope, default_params, g2_deterministic
from atomtrap.correlate import DiffusionEnvelope
from atomtrap.fileio import write_series

try:
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

tau = np.linspace(0.0, 150e-9, 1501)
env = DiffusionEnvelope(amplitude=0.24, rate=1.0 / 1.8e-6)

series = {}
for depth in (0.38, 0.81):
    s = g2_deterministic(default_params(trap_depth_mK=depth), tau)
    series[depth] = s
    path = os.path.join(OUT, f"g2_depth_{depth:.2f}mK.csv")
    write_series(apply_envelope(s, env), path)
    i = np.argmax(s.g2)
    print(f"U = {depth} mK: peak g2 = {s.g2[i]:.3f} at {abs(s.tau[i])*1e9:.2f} ns")
    print(f"  wrote {path}")

if plt is not None:
    fig, ax = plt.subplots(figsize=(7, 4))
    for depth, s in series.items():
        m = s.tau >= 0
        ax.plot(s.tau[m] * 1e9, s.g2[m], label=f"U = {depth} mK")
    ax.axhline(1.0, color="k", lw=0.5)
    ax.set_xlabel("tau (ns)")
    ax.set_ylabel("g2(tau)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(os.path.join(OUT, "g2_oscillations.png"), dpi=150)
    print(f"wrote {os.path.join(OUT, 'g2_oscillations.png')}")
