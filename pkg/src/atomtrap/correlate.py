"""Second-order intensity correlations of the single-atom fluorescence.

The deterministic g2 follows from the quantum regression theorem: after a
photon detection the state collapses onto the ground levels with the
spontaneous branching weights, and

    g2(tau) = P_exc(tau | reset) / P_exc(steady)

with P_exc the summed excited-state population. Slow centre-of-mass motion
through the detection volume multiplies the bare correlation by a
diffusion envelope 1 + A exp(-k |tau|), whose parameters are fitted from
data, never predicted.

Measured histograms are normalised by the uncorrelated-coincidence density
r1 r2 dtau T; Poisson background (stray light and detector dark counts)
is removed by solving the two-channel mixing identity for the atom-only
correlation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from .bloch import (DIM, RotatingFrameSystem, build_system,
                    density_from_populations, evolve, excited_population,
                    steady_state)
from .constants import EXC_F2, EXC_F3, GND_F1, GND_F2
from .params import ExperimentParams

SERIES_KINDS = ("deterministic", "monte-carlo", "measured")


class EnvelopeFitError(RuntimeError):
    """Diffusion-envelope fit failed to converge."""


class InsufficientRangeError(ValueError):
    """Series does not reach far enough in |tau| for an envelope fit."""


@dataclass
class CorrelationSeries:
    """g2 samples on a signed tau grid (seconds)."""

    tau: np.ndarray
    g2: np.ndarray
    sigma: np.ndarray
    kind: str = "deterministic"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.tau = np.asarray(self.tau, dtype=float)
        self.g2 = np.asarray(self.g2, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        if not (self.tau.shape == self.g2.shape == self.sigma.shape):
            raise ValueError("tau, g2 and sigma must have matching shapes")
        if self.kind not in SERIES_KINDS:
            raise ValueError(f"kind must be one of {SERIES_KINDS}")
        if np.any(np.diff(self.tau) <= 0):
            raise ValueError("tau grid must be strictly increasing")
        if np.any(self.sigma < 0):
            raise ValueError("sigma must be non-negative")
        # estimators built from counts are non-negative by construction;
        # background-corrected data may fluctuate below zero.
        if self.kind in ("deterministic", "monte-carlo") and np.any(self.g2 < -1e-12):
            raise ValueError("negative g2 in a counts-based series")


@dataclass(frozen=True)
class DiffusionEnvelope:
    """Multiplicative bunching envelope 1 + amplitude * exp(-rate * |tau|)."""

    amplitude: float = 0.24
    rate: float = 1.0 / 1.8e-6  # 1/s

    def __post_init__(self):
        if self.amplitude < 0 or self.rate <= 0:
            raise ValueError("need amplitude >= 0 and rate > 0")

    def __call__(self, tau) -> np.ndarray:
        return 1.0 + self.amplitude * np.exp(-self.rate * np.abs(np.asarray(tau, dtype=float)))


def emission_reset_state(rho_ss: np.ndarray, system: RotatingFrameSystem) -> np.ndarray:
    """Post-detection state: excited populations dropped to the ground levels.

    F'=3 feeds F=2; F'=2 feeds F=1 and F=2 in halves. Ground populations of
    the pre-measurement state are discarded (the detected photon projects
    onto 'an emission just happened'), and the result is renormalised.
    """
    # the linear solve can leave populations negative at the 1e-16 level;
    # clamp those (validation upstream bounds how negative they can be)
    p_e2 = max(rho_ss[EXC_F2, EXC_F2].real, 0.0)
    p_e3 = max(rho_ss[EXC_F3, EXC_F3].real, 0.0)
    if p_e2 + p_e3 <= 0:
        raise ValueError("steady state carries no excited population; nothing emits")
    pops = np.zeros(DIM)
    pops[GND_F1] = p_e2 / 2.0
    pops[GND_F2] = p_e2 / 2.0 + p_e3
    return density_from_populations(pops)


def g2_deterministic(params: ExperimentParams, tau_grid) -> CorrelationSeries:
    """Regression-theorem g2 on a tau >= 0 grid, mirrored to negative lags.

    tau_grid must be sorted and non-negative; the returned series covers
    the signed axis (g2 is even in tau). g2(0) is exactly zero because the
    reset state holds no excited population.
    """
    tau_grid = np.asarray(tau_grid, dtype=float)
    if tau_grid.ndim != 1 or tau_grid.size == 0:
        raise ValueError("tau_grid must be a non-empty 1-d array")
    if tau_grid[0] < 0:
        raise ValueError("tau_grid must be non-negative (series is mirrored)")

    system = build_system(params)
    rho_ss = steady_state(system)
    denom = excited_population(rho_ss)
    reset = emission_reset_state(rho_ss, system)
    states = evolve(reset, system, tau_grid)
    g2_pos = np.array([excited_population(r) for r in states]) / denom
    g2_pos = np.where(np.abs(g2_pos) < 1e-300, 0.0, g2_pos)

    if tau_grid[0] == 0.0:
        tau = np.concatenate([-tau_grid[:0:-1], tau_grid])
        g2 = np.concatenate([g2_pos[:0:-1], g2_pos])
    else:
        tau = np.concatenate([-tau_grid[::-1], tau_grid])
        g2 = np.concatenate([g2_pos[::-1], g2_pos])
    return CorrelationSeries(tau=tau, g2=g2, sigma=np.zeros_like(g2),
                             kind="deterministic",
                             meta={"excited_steady": denom})


def apply_envelope(series: CorrelationSeries, envelope: DiffusionEnvelope) -> CorrelationSeries:
    """Multiply a correlation series by the diffusion envelope."""
    env = envelope(series.tau)
    return CorrelationSeries(tau=series.tau.copy(), g2=series.g2 * env,
                             sigma=series.sigma * env, kind=series.kind,
                             meta={**series.meta, "envelope_amplitude": envelope.amplitude,
                                   "envelope_rate": envelope.rate})


def fit_envelope(series: CorrelationSeries, tau_min: float) -> tuple[DiffusionEnvelope, np.ndarray]:
    """Weighted fit of 1 + A exp(-k |tau|) to the long-lag part of a series.

    Only points with |tau| >= tau_min enter (the antibunching dip and Rabi
    oscillations must be excluded by the caller's choice of tau_min).
    Returns the envelope and the 2x2 covariance of (A, k). Raises
    InsufficientRangeError unless the data reach beyond 2 * tau_min with at
    least 8 usable points, and EnvelopeFitError when the fit does not
    converge.
    """
    if tau_min <= 0:
        raise ValueError("tau_min must be positive")
    mask = np.abs(series.tau) >= tau_min
    if mask.sum() < 8 or np.abs(series.tau).max() < 2.0 * tau_min:
        raise InsufficientRangeError(
            f"need >= 8 points with |tau| >= {tau_min:.2e} s reaching 2*tau_min")
    x = np.abs(series.tau[mask])
    y = series.g2[mask]
    sig = series.sigma[mask]
    sig = np.where(sig > 0, sig, np.median(sig[sig > 0]) if np.any(sig > 0) else 1.0)

    def model(t, amp, rate):
        return 1.0 + amp * np.exp(-rate * t)

    a0 = max(float(np.mean(y[x <= x.min() * 1.5 + 1e-30]) - 1.0), 1e-3)
    k0 = 3.0 / float(x.max())
    try:
        popt, pcov = curve_fit(model, x, y, p0=(a0, k0), sigma=sig,
                               absolute_sigma=True, maxfev=20000,
                               bounds=((0.0, 0.0), (np.inf, np.inf)))
    except (RuntimeError, ValueError) as exc:
        raise EnvelopeFitError(f"envelope fit failed: {exc}") from exc
    if not np.all(np.isfinite(pcov)):
        raise EnvelopeFitError("envelope fit covariance is singular")
    return DiffusionEnvelope(amplitude=float(popt[0]), rate=float(popt[1])), pcov


def normalize_histogram(counts, tau_centers, rate1: float, rate2: float,
                        bin_width: float, live_time: float,
                        kind: str = "monte-carlo") -> CorrelationSeries:
    """Coincidence counts -> g2 estimate via the uncorrelated density.

    Divides per-bin counts by r1 r2 dtau T, the expectation for two
    independent Poisson streams; the Poisson error of an empty bin is
    taken as one count.
    """
    counts = np.asarray(counts, dtype=float)
    tau_centers = np.asarray(tau_centers, dtype=float)
    if counts.shape != tau_centers.shape:
        raise ValueError("counts and tau_centers must match")
    if min(rate1, rate2) <= 0 or bin_width <= 0 or live_time <= 0:
        raise ValueError("rates, bin width and live time must be positive")
    norm = rate1 * rate2 * bin_width * live_time
    g2 = counts / norm
    sigma = np.sqrt(np.maximum(counts, 1.0)) / norm
    return CorrelationSeries(tau=tau_centers, g2=g2, sigma=sigma, kind=kind,
                             meta={"rate1": rate1, "rate2": rate2,
                                   "bin_width": bin_width, "live_time": live_time})


def background_correct(series: CorrelationSeries, rate1: float, rate2: float,
                       bg1: float, bg2: float) -> CorrelationSeries:
    """Remove uncorrelated background from a normalised g2 measurement.

    With total rates r_i and background rates b_i (signal s_i = r_i - b_i),
    the measured normalised correlation mixes as

        g2_meas r1 r2 = s1 s2 g2_atom + s1 b2 + s2 b1 + b1 b2,

    because background-background and signal-background pairs are flat.
    Solving for g2_atom rescales the statistical errors by r1 r2 / (s1 s2).
    """
    if not (0 <= bg1 < rate1 and 0 <= bg2 < rate2):
        raise ValueError("need 0 <= background < total rate on both channels")
    s1, s2 = rate1 - bg1, rate2 - bg2
    g2 = (series.g2 * rate1 * rate2 - s1 * bg2 - s2 * bg1 - bg1 * bg2) / (s1 * s2)
    sigma = series.sigma * rate1 * rate2 / (s1 * s2)
    return CorrelationSeries(tau=series.tau.copy(), g2=g2, sigma=sigma,
                             kind="measured",
                             meta={**series.meta, "bg1": bg1, "bg2": bg2})
