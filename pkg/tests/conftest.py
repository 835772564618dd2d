"""Shared fixtures. The expensive Monte Carlo run is session-scoped and
reused by the statistical tests and the acceptance suite."""

import time

import numpy as np
import pytest

from atomtrap import (BeamGeometry, detection_chain, g2_deterministic,
                      quantum_jump_emissions)
from atomtrap.trap import default_params

MC_SEED = 20_000
MC_DURATION = 1.0   # s; ~1.1e6 emissions at the reference settings


@pytest.fixture(scope="session")
def params():
    return default_params()


@pytest.fixture(scope="session")
def mc_run():
    """Full-efficiency, dark-free photon stream of >= 1e6 emissions."""
    t0 = time.perf_counter()
    p = default_params(detection_efficiency=1.0, dark_rate_per_detector=0.0)
    emissions = quantum_jump_emissions(p, MC_DURATION, MC_SEED, n_segments=8)
    stream = detection_chain(emissions, MC_DURATION, p, MC_SEED)
    return {"params": p, "duration": MC_DURATION, "seed": MC_SEED,
            "emissions": emissions, "stream": stream,
            "build_seconds": time.perf_counter() - t0}


@pytest.fixture(scope="session")
def det_fine(params):
    """Deterministic g2 on a 0.05 ns grid out to 160 ns, for bin averages."""
    tau = np.arange(0.0, 160e-9 + 0.025e-9, 0.05e-9)
    return g2_deterministic(params, tau)


@pytest.fixture(scope="session")
def uniform_geometry():
    """Four beams orthogonal to the detection axis: every projection
    factor equals sqrt(2), so the Doppler kernel is a single Gaussian."""
    return BeamGeometry(
        beams=(((1.0, 0.0, 0.0), 0.25), ((-1.0, 0.0, 0.0), 0.25),
               ((0.0, 1.0, 0.0), 0.25), ((0.0, -1.0, 0.0), 0.25)),
        detection_axis=(0.0, 0.0, 1.0))


def oscillation_frequency(series) -> float:
    """1 / (spacing of the first two positive-lag maxima), Hz."""
    pos = series.tau > 0
    t, g = series.tau[pos], series.g2[pos]
    interior = np.flatnonzero((g[1:-1] > g[:-2]) & (g[1:-1] >= g[2:])) + 1
    assert interior.size >= 2, "series too short to hold two maxima"
    peaks = []
    for i in interior[:2]:
        denom = g[i - 1] - 2 * g[i] + g[i + 1]
        shift = 0.5 * (g[i - 1] - g[i + 1]) / denom if denom < 0 else 0.0
        peaks.append(t[i] + shift * (t[1] - t[0]))
    return 1.0 / (peaks[1] - peaks[0])


def bin_average(series, centers, width):
    """Average a finely sampled even series over bins (center, width)."""
    out = np.empty(len(centers))
    t = np.abs(series.tau)
    for i, c in enumerate(centers):
        m = (t >= abs(c) - width / 2) & (t < abs(c) + width / 2)
        out[i] = series.g2[m].mean()
    return out
