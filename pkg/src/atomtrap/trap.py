"""Far-off-resonance dipole trap physics and light-shift calibration.

The trap potential and photon scattering rate use the two-line (D1 + D2)
rotating-wave expressions for a linearly polarised Gaussian beam acting on
the alkali ground state,

    U(r)    = (pi c^2 Gamma / 2 w_D2^3) (2/delta_D2 + 1/delta_D1) I(r)
    R_sc(r) = (pi c^2 Gamma^2 / 2 hbar w_D2^3) (2/delta_D2^2 + 1/delta_D1^2) I(r)

with delta_i = w_laser - w_i the detunings from the two D lines and the
2:1 weights from the fine-structure line strengths; see R. Grimm,
M. Weidemueller and Y. Ovchinnikov, Adv. At. Mol. Opt. Phys. 42, 95 (2000).

Intense trapping light also shifts the cooling transition: the model here
is a single scalar, the effective cooling detuning at trap depth U being
Delta_eff = Delta_CL - eta * U. `calibrate_light_shift` fixes eta and the
bare Rabi rate from two measured effective Rabi frequencies.
"""

from __future__ import annotations

import numpy as np

from .constants import RB87, TWOPI, PhysicalConstants
from .params import BeamGeometry, ExperimentParams, TrapBeam


class TrapWavelengthError(ValueError):
    """Trap light is not red-detuned from both D lines."""


# Effective-Rabi anchors: (trap depth in mK, measured effective Rabi in rad/s)
# at cooling detuning -2pi*31 MHz, single-beam intensity 103 mW/cm^2.
LIGHT_SHIFT_ANCHORS = ((0.38, TWOPI * 47.5e6), (0.81, TWOPI * 62.5e6))
ANCHOR_DETUNING_COOL = -TWOPI * 31e6
ANCHOR_INTENSITY_COOL = 103.0   # mW/cm^2
ANCHOR_INTENSITY_REPUMP = 12.0  # mW/cm^2

# Hyperfine line-strength ratios of the Rb-87 D2 line (isotropic light):
# S(F=2 -> F'=2) / S(F=2 -> F'=3) and S(F=1 -> F'=2) / S(F=2 -> F'=3).
STRENGTH_RATIO_COOL_FP2 = (1.0 / 4.0) / (7.0 / 10.0)
STRENGTH_RATIO_REPUMP = (5.0 / 12.0) / (7.0 / 10.0)


def _two_line_weights(wavelength: float, const: PhysicalConstants):
    if wavelength <= const.lambda_d1:
        raise TrapWavelengthError(
            f"trap wavelength {wavelength * 1e9:.1f} nm must be red of the D1 line "
            f"({const.lambda_d1 * 1e9:.1f} nm)")
    w_laser = TWOPI * const.c / wavelength
    w_d2 = TWOPI * const.c / const.lambda_d2
    w_d1 = TWOPI * const.c / const.lambda_d1
    return w_laser - w_d2, w_laser - w_d1, w_d2


def peak_intensity(beam: TrapBeam) -> float:
    """On-axis intensity of a Gaussian beam, W/m^2."""
    return 2.0 * beam.power / (np.pi * beam.waist ** 2)


def trap_depth(beam: TrapBeam, const: PhysicalConstants = RB87) -> float:
    """Peak depth of the dipole potential, returned in mK (energy / kB).

    Scales linearly with power and with 1/waist^2. Raises
    TrapWavelengthError unless the trap light is red-detuned from both
    D lines.
    """
    d2, d1, w_d2 = _two_line_weights(beam.wavelength, const)
    pref = np.pi * const.c ** 2 * const.gamma / (2.0 * w_d2 ** 3)
    u = pref * (2.0 / d2 + 1.0 / d1) * peak_intensity(beam)  # J, negative
    return float(-u / const.kB * 1e3)


def photon_scattering_rate(beam: TrapBeam, const: PhysicalConstants = RB87) -> float:
    """Trap-light photon scattering rate at the trap centre, 1/s."""
    d2, d1, w_d2 = _two_line_weights(beam.wavelength, const)
    pref = np.pi * const.c ** 2 * const.gamma ** 2 / (2.0 * const.hbar * w_d2 ** 3)
    return float(pref * (2.0 / d2 ** 2 + 1.0 / d1 ** 2) * peak_intensity(beam))


def rabi_from_intensity(intensity: float, line_strength: float,
                        i_sat: float = RB87.i_sat,
                        const: PhysicalConstants = RB87) -> float:
    """Rabi rate (rad/s) of one transition in the six-beam light field.

    Omega = Gamma * sqrt(6 I s / (2 I_sat)): six beams of single-beam
    intensity I (mW/cm^2) add incoherently, s is the transition's
    line-strength factor on the I_sat convention chosen (isotropic-light
    saturation intensity by default).
    """
    if intensity < 0 or line_strength < 0 or i_sat <= 0:
        raise ValueError("intensity and line strength must be >= 0, i_sat > 0")
    return float(const.gamma * np.sqrt(6.0 * intensity * line_strength / (2.0 * i_sat)))


def line_strength_from_rabi(rabi: float, intensity: float,
                            i_sat: float = RB87.i_sat,
                            const: PhysicalConstants = RB87) -> float:
    """Inverse of `rabi_from_intensity`: the s that reproduces a known Omega."""
    return float((rabi / const.gamma) ** 2 * 2.0 * i_sat / (6.0 * intensity))


def calibrate_light_shift(anchors=LIGHT_SHIFT_ANCHORS,
                          detuning_cool: float = ANCHOR_DETUNING_COOL):
    """Solve two (U, Omega_eff) anchors for (eta, Omega_bare).

    Omega_eff(U)^2 = Omega^2 + (Delta_CL - eta U)^2 gives, subtracting the
    two anchor equations, a quadratic in eta; the root with eta > 0
    (light shift deepens the effective red detuning) is taken and Omega
    follows by back-substitution. Returns (eta in rad/s per mK, Omega in
    rad/s).
    """
    (u1, w1), (u2, w2) = anchors
    if u1 == u2:
        raise ValueError("anchors need two distinct trap depths")
    # (d - eta u2)^2 - (d - eta u1)^2 = w2^2 - w1^2, d = detuning_cool < 0
    a = u2 ** 2 - u1 ** 2
    b = -2.0 * detuning_cool * (u2 - u1)
    c = -(w2 ** 2 - w1 ** 2)
    disc = b * b - 4.0 * a * c
    if disc < 0:
        raise ValueError("anchors are inconsistent with the light-shift model")
    eta = (-b + np.sqrt(disc)) / (2.0 * a)
    rabi_sq = w1 ** 2 - (detuning_cool - eta * u1) ** 2
    if rabi_sq <= 0:
        raise ValueError("anchors imply a non-positive bare Rabi rate")
    return float(eta), float(np.sqrt(rabi_sq))


def effective_rabi(trap_depth_mK: float, params: ExperimentParams) -> float:
    """Generalised Rabi rate of the cooling transition at a given depth.

    sqrt(Omega3^2 + Delta_eff^2) with Delta_eff = Delta_CL - eta U; this is
    the frequency of the intensity-correlation oscillations.
    """
    d_eff = params.detuning_cool - params.stark_coeff * trap_depth_mK
    return float(np.hypot(params.rabi_cool_fp3, d_eff))


def effective_detunings(params: ExperimentParams) -> tuple[float, float, float]:
    """Light-shifted laser detunings (repump, cool->F'=2, cool->F'=3), rad/s.

    Only the cooling-laser detunings carry the AC-Stark shift; the repump
    detuning is used as configured. The cooling laser sits one excited-state
    hyperfine splitting above its detuning from F'=3 when driving F'=2.
    """
    shift = params.stark_coeff * params.trap_depth_mK
    d_fp3 = params.detuning_cool - shift
    d_fp2 = d_fp3 + params.constants.hf_splitting_excited
    return params.detuning_repump, d_fp2, d_fp3


def default_params(trap_depth_mK: float = 0.38, **overrides) -> ExperimentParams:
    """ExperimentParams with the reference settings of the experiment.

    Cooling laser at -2pi*31 MHz and 103 mW/cm^2, repump resonant at
    12 mW/cm^2, light-shift coefficient and Rabi rates fixed by
    `calibrate_light_shift`. Keyword overrides replace individual fields.
    """
    eta, rabi3 = calibrate_light_shift()
    s3 = line_strength_from_rabi(rabi3, ANCHOR_INTENSITY_COOL)
    rabi2 = rabi3 * np.sqrt(STRENGTH_RATIO_COOL_FP2)
    rabi1 = rabi_from_intensity(ANCHOR_INTENSITY_REPUMP, s3 * STRENGTH_RATIO_REPUMP)
    fields = dict(
        rabi_repump=rabi1,
        rabi_cool_fp2=rabi2,
        rabi_cool_fp3=rabi3,
        detuning_repump=0.0,
        detuning_cool=ANCHOR_DETUNING_COOL,
        trap_depth_mK=trap_depth_mK,
        stark_coeff=eta,
    )
    fields.update(overrides)
    return ExperimentParams(**fields)


def trap_report(beam: TrapBeam, params: ExperimentParams,
                const: PhysicalConstants = RB87) -> dict[str, float]:
    """Depth, scattering rate and effective Rabi figures for one beam."""
    depth = trap_depth(beam, const)
    return {
        "trap_depth_mK": depth,
        "scattering_rate_per_s": photon_scattering_rate(beam, const),
        "effective_rabi_MHz": effective_rabi(depth, params) / TWOPI / 1e6,
        "effective_rabi_at_config_depth_MHz":
            effective_rabi(params.trap_depth_mK, params) / TWOPI / 1e6,
    }


def doppler_geometry_summary(geometry: BeamGeometry) -> dict[str, float]:
    g = geometry.g_factors()
    nz = g[g > 0]
    return {
        "g_rms": float(np.sqrt(geometry.mean_g_squared())),
        "g_min_nonzero": float(nz.min()) if nz.size else 0.0,
        "g_max": float(g.max()),
    }
