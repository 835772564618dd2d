"""Doppler thermometry round trip: synthesize noisy spectra, fit back T."""

import os

import numpy as np

from atomtrap.fileio import write_fit_report, write_series
from atomtrap.spectrum import (DopplerModel, InstrumentModel,
                               add_counting_noise, fit_temperature,
                               fluorescence_spectrum, measure_fwhm,
                               reference_spectrum, systematic_bounds)

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

T_UK = 105.0
PEAK_COUNTS = 150.0

grid = np.arange(-600, 601) * 0.01   # MHz
inst = InstrumentModel()             # 0.45 MHz cavity, 0.6 MHz laser
dop = DopplerModel(T_UK * 1e-6)      # default 6-beam geometry

ref = reference_spectrum(inst, grid)
clean = fluorescence_spectrum(ref, dop)
noisy = add_counting_noise(clean, PEAK_COUNTS, np.random.default_rng(7))

write_series(ref, os.path.join(OUT, "spectrum_reference.csv"))
write_series(noisy, os.path.join(OUT, "spectrum_fluorescence.csv"))
print(f"reference FWHM {measure_fwhm(ref):.3f} MHz, "
      f"broadened {measure_fwhm(clean):.3f} MHz at {T_UK} uK")

fit = fit_temperature(ref, noisy, dop)
lo, hi = systematic_bounds(fit, dop)
print(f"fit: E_kin = {fit.e_kin_uk:.1f} +- {fit.stat_err_uk:.1f} uK "
      f"(systematic {lo:.1f} .. {hi:.1f}), chi2_red = {fit.chi2_red:.3f}")

write_fit_report(os.path.join(OUT, "temperature_fit.txt"), {
    "E_kin_uK": fit.e_kin_uk,
    "stat_err_uK": fit.stat_err_uk,
    "sys_low_uK": lo,
    "sys_high_uK": hi,
    "chi2_red": fit.chi2_red,
})
print(f"wrote {os.path.join(OUT, 'temperature_fit.txt')}")
