"""Dipole-trap figures of merit and the light-shift calibration."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atomtrap.constants import RB87, TWOPI
from atomtrap.params import BeamGeometry, TrapBeam
from atomtrap.trap import (ANCHOR_DETUNING_COOL, TrapWavelengthError,
                           calibrate_light_shift, default_params,
                           doppler_geometry_summary, effective_detunings,
                           effective_rabi, line_strength_from_rabi,
                           photon_scattering_rate, rabi_from_intensity,
                           trap_depth, trap_report)

REFERENCE_BEAM = TrapBeam(power=44e-3, waist=3.5e-6, wavelength=856e-9)

# independent evaluation of the two-line rotating-wave potential
#   U = pi c^2 Gamma / (2 w0^3) * (2/d_D2 + 1/d_D1) * I0,  I0 = 2P/(pi w^2)
# at 44 mW, 3.5 um, 856 nm (d_i = 1/delta_i - 1/(delta_i + 2 w_i))
ORACLE_DEPTH_MK = 0.9572793018693488
ORACLE_SCATTER_S = 24.382981261379893


def test_trap_depth_matches_two_line_oracle():
    assert trap_depth(REFERENCE_BEAM) == pytest.approx(ORACLE_DEPTH_MK, rel=1e-9)


def test_scattering_rate_matches_two_line_oracle():
    assert photon_scattering_rate(REFERENCE_BEAM) == pytest.approx(
        ORACLE_SCATTER_S, rel=1e-9)


def test_zero_power_gives_zero_depth_and_scattering():
    beam = TrapBeam(power=0.0, waist=3.5e-6, wavelength=856e-9)
    assert trap_depth(beam) == 0.0
    assert photon_scattering_rate(beam) == 0.0


@pytest.mark.parametrize("wavelength", [700e-9, 780e-9, 794.9e-9])
def test_blue_of_d1_raises(wavelength):
    beam = TrapBeam(power=44e-3, waist=3.5e-6, wavelength=wavelength)
    with pytest.raises(TrapWavelengthError):
        trap_depth(beam)
    with pytest.raises(TrapWavelengthError):
        photon_scattering_rate(beam)


@settings(max_examples=50, deadline=None)
@given(power=st.floats(1e-4, 1.0), waist=st.floats(1e-6, 2e-5),
       scale=st.floats(1.1, 5.0))
def test_depth_scaling_in_power_and_waist(power, waist, scale):
    # linear in power, inverse-square in waist
    base = trap_depth(TrapBeam(power=power, waist=waist, wavelength=856e-9))
    assert trap_depth(TrapBeam(power=power * scale, waist=waist,
                               wavelength=856e-9)) == pytest.approx(base * scale, rel=1e-9)
    assert trap_depth(TrapBeam(power=power, waist=waist * scale,
                               wavelength=856e-9)) == pytest.approx(base / scale ** 2, rel=1e-9)


def test_calibration_reproduces_both_anchors():
    p = default_params()
    assert effective_rabi(0.38, p) == pytest.approx(TWOPI * 47.5e6, rel=1e-12)
    assert effective_rabi(0.81, p) == pytest.approx(TWOPI * 62.5e6, rel=1e-12)


def test_calibrated_shift_deepens_red_detuning():
    eta, rabi3 = calibrate_light_shift()
    assert eta > 0 and rabi3 > 0
    p = default_params(trap_depth_mK=0.5)
    _, _, d3 = effective_detunings(p)
    assert d3 < p.detuning_cool < 0


def test_effective_detunings_structure():
    p = default_params(trap_depth_mK=0.81)
    d1, d2, d3 = effective_detunings(p)
    assert d1 == p.detuning_repump           # repump carries no light shift
    assert d2 - d3 == pytest.approx(RB87.hf_splitting_excited, rel=1e-12)
    assert d3 == pytest.approx(ANCHOR_DETUNING_COOL - p.stark_coeff * 0.81)


def test_anchor_detunings_differ_between_depths():
    p = default_params()
    f_lo = effective_rabi(0.38, p)
    f_hi = effective_rabi(0.81, p)
    assert f_hi > f_lo


def test_rabi_intensity_round_trip():
    s = line_strength_from_rabi(TWOPI * 15e6, 103.0)
    assert rabi_from_intensity(103.0, s) == pytest.approx(TWOPI * 15e6, rel=1e-12)
    # four times the intensity doubles the Rabi rate
    assert rabi_from_intensity(412.0, s) == pytest.approx(TWOPI * 30e6, rel=1e-12)


def test_trap_report_keys_and_values(params):
    rep = trap_report(REFERENCE_BEAM, params)
    assert rep["trap_depth_mK"] == pytest.approx(ORACLE_DEPTH_MK)
    assert rep["scattering_rate_per_s"] == pytest.approx(ORACLE_SCATTER_S)
    assert rep["effective_rabi_at_config_depth_MHz"] == pytest.approx(47.5, rel=1e-9)
    assert rep["effective_rabi_MHz"] > rep["effective_rabi_at_config_depth_MHz"]


def test_default_geometry_projection_factors(params):
    geom = params.beam_geometry
    g = np.sort(np.unique(np.round(geom.g_factors(), 10)))
    assert g.size == 2
    assert g[0] == pytest.approx(np.sqrt(2.0 - 2.0 / np.sqrt(3.0)), rel=1e-9)
    assert g[1] == pytest.approx(np.sqrt(2.0 + 2.0 / np.sqrt(3.0)), rel=1e-9)
    assert geom.mean_g_squared() == pytest.approx(2.0, abs=1e-12)
    summ = doppler_geometry_summary(geom)
    assert summ["g_rms"] == pytest.approx(np.sqrt(2.0), rel=1e-12)
    assert summ["g_min_nonzero"] == pytest.approx(g[0])
    assert summ["g_max"] == pytest.approx(g[1])


def test_any_unit_geometry_has_mean_g_squared_two():
    # sum over +/- beam pairs cancels the cross term for any axes
    geom = BeamGeometry()
    assert geom.mean_g_squared() == pytest.approx(2.0, abs=1e-12)


def test_geometry_validation():
    with pytest.raises(ValueError):
        BeamGeometry(beams=(((1.0, 1.0, 0.0), 1.0),))   # not unit
    with pytest.raises(ValueError):
        BeamGeometry(beams=(((1.0, 0.0, 0.0), 0.5),))   # weights != 1
    with pytest.raises(ValueError):
        BeamGeometry(detection_axis=(2.0, 0.0, 0.0))


def test_default_params_overrides():
    p = default_params(trap_depth_mK=0.81, atom_rate=9000.0)
    assert p.trap_depth_mK == 0.81
    assert p.atom_rate == 9000.0
    assert p.detuning_cool == ANCHOR_DETUNING_COOL
