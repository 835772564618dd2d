"""Parameter records for the single-atom dipole-trap experiment.

All laser frequencies are stored as angular detunings/Rabi rates in rad/s;
conversion from the MHz found in config files happens once, at ingestion.
Laser detunings are referenced to the unperturbed (free-atom) transitions;
the trap-induced light shift is applied when the rotating-frame system is
built (see :mod:`atomtrap.trap` and :mod:`atomtrap.bloch`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import RB87, TWOPI, PhysicalConstants

Vec3 = tuple[float, float, float]


def _default_beams() -> tuple[tuple[Vec3, float], ...]:
    w = 1.0 / 6.0
    return (
        ((1.0, 0.0, 0.0), w),
        ((-1.0, 0.0, 0.0), w),
        ((0.0, 1.0, 0.0), w),
        ((0.0, -1.0, 0.0), w),
        ((0.0, 0.0, 1.0), w),
        ((0.0, 0.0, -1.0), w),
    )


_S3 = 1.0 / np.sqrt(3.0)


@dataclass(frozen=True)
class BeamGeometry:
    """Cooling-beam directions/weights and the fluorescence detection axis.

    Each beam is a (unit propagation direction, weight) pair; weights sum
    to one. The default is three orthogonal counter-propagating pairs with
    the detection axis along the cube diagonal, so no beam is parallel to
    the detector.
    """

    beams: tuple[tuple[Vec3, float], ...] = field(default_factory=_default_beams)
    detection_axis: Vec3 = (_S3, _S3, _S3)

    def __post_init__(self):
        if len(self.beams) == 0:
            raise ValueError("beam geometry needs at least one beam")
        for direction, weight in self.beams:
            if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
                raise ValueError(f"beam direction {direction} is not a unit vector")
            if weight < 0:
                raise ValueError("beam weights must be non-negative")
        if abs(sum(w for _, w in self.beams) - 1.0) > 1e-9:
            raise ValueError("beam weights must sum to 1")
        if abs(np.linalg.norm(self.detection_axis) - 1.0) > 1e-9:
            raise ValueError("detection axis is not a unit vector")

    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.beams])

    def g_factors(self) -> np.ndarray:
        """Geometry factor g_j = |k_out - k_in|/k = 2 sin(theta_j/2) per beam.

        theta_j is the angle between beam j and the detection axis; g_j
        scales the projection of the atomic velocity onto the momentum
        transfer that Doppler-shifts light scattered from that beam into
        the detector.
        """
        d = np.asarray(self.detection_axis, dtype=float)
        out = np.empty(len(self.beams))
        for j, (direction, _) in enumerate(self.beams):
            out[j] = np.linalg.norm(d - np.asarray(direction, dtype=float))
        return out

    def mean_g_squared(self) -> float:
        """Weight-averaged g^2 (the variance mixing factor of the beams)."""
        return float(np.sum(self.weights() * self.g_factors() ** 2))


@dataclass(frozen=True)
class TrapBeam:
    """Gaussian dipole-trap beam: power (W), waist (m), wavelength (m)."""

    power: float = 44e-3
    waist: float = 3.5e-6
    wavelength: float = 856e-9

    def __post_init__(self):
        if self.power < 0 or self.waist <= 0 or self.wavelength <= 0:
            raise ValueError("trap beam needs power >= 0, waist > 0, wavelength > 0")


@dataclass(frozen=True)
class ExperimentParams:
    """Laser, trap and detection settings of a single run.

    Rabi rates and detunings are angular (rad/s). `detuning_cool` and
    `detuning_repump` are measured from the unperturbed transitions; the
    light shift `stark_coeff * trap_depth_mK` is added to the cooling-laser
    detunings by the system builder (single-scalar AC-Stark model).
    """

    rabi_repump: float            # F=1 -> F'=2, driven by the repump laser
    rabi_cool_fp2: float          # F=2 -> F'=2, driven by the cooling laser
    rabi_cool_fp3: float          # F=2 -> F'=3, driven by the cooling laser
    detuning_repump: float        # rad/s, bare
    detuning_cool: float          # rad/s, bare, relative to F=2 -> F'=3
    trap_depth_mK: float = 0.38
    stark_coeff: float = 0.0      # rad/s per mK of trap depth
    intensity_cool: float = 103.0     # mW/cm^2, single-beam
    intensity_repump: float = 12.0    # mW/cm^2
    detection_efficiency: float = 1e-3
    background_rate: float = 450.0        # counts/s, trap empty
    atom_rate: float = 2250.0             # counts/s, one atom
    dark_rate_per_detector: float = 300.0  # counts/s
    load_rate: float = 0.2                # atoms/s into the trap
    loss_rate: float = 1.0 / 2.2          # 1/s, single-atom 1/e loss
    hyperfine_flip_rate: float = 0.1      # 1/s, F=2 -> F=1 ground transfer
    beam_geometry: BeamGeometry = field(default_factory=BeamGeometry)
    constants: PhysicalConstants = RB87

    def __post_init__(self):
        if not 0.0 <= self.detection_efficiency <= 1.0:
            raise ValueError("detection_efficiency must be in [0, 1]")
        for name in ("rabi_repump", "rabi_cool_fp2", "rabi_cool_fp3",
                     "background_rate", "atom_rate", "dark_rate_per_detector",
                     "load_rate", "loss_rate", "hyperfine_flip_rate",
                     "trap_depth_mK"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


def rabi_mhz(params: ExperimentParams) -> tuple[float, float, float]:
    """Rabi rates as ordinary MHz, for reports and logs."""
    return (params.rabi_repump / TWOPI / 1e6,
            params.rabi_cool_fp2 / TWOPI / 1e6,
            params.rabi_cool_fp3 / TWOPI / 1e6)
