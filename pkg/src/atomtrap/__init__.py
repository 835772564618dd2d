"""Resonance fluorescence of a single optically trapped rubidium atom.

Simulation and analysis toolkit for one laser-cooled atom in an optical
dipole trap: deterministic intensity-correlation functions from the optical
Bloch equations, stochastic photon streams through a Hanbury Brown-Twiss
detector pair, trap-occupancy telegraph signals, Doppler-broadened emission
spectra with temperature extraction, and dipole-trap figure-of-merit
reports.
"""

from .bloch import (DIM, DegenerateSteadyStateError, IntegrationError,
                    RotatingFrameSystem, build_system, density_from_populations,
                    evolve, excited_population, liouville_rhs, steady_state,
                    validate_density_matrix)
from .constants import (EXC_F2, EXC_F3, GND_F1, GND_F2, RB87, TWOPI,
                        PhysicalConstants)
from .correlate import (CorrelationSeries, DiffusionEnvelope, EnvelopeFitError,
                        InsufficientRangeError, apply_envelope,
                        background_correct, emission_reset_state, fit_envelope,
                        g2_deterministic, normalize_histogram)
from .fileio import (ConfigError, ParsedDocument, ParseError, RunConfig,
                     parse_config, read_config, read_fit_report, read_series,
                     read_timetags, read_timetags_csv, write_fit_report,
                     write_series, write_timetags, write_timetags_csv)
from .montecarlo import (CoincidenceHistogram, EmptyStreamError,
                         TelegraphTrace, ThresholdRangeError, TimeTagStream,
                         build_wait_tables, coincidence_histogram,
                         detected_fraction, detection_chain,
                         occupancy_histogram, quantum_jump_emissions,
                         stream_rng, telegraph_signal, threshold_gate)
from .params import (BeamGeometry, ExperimentParams, TrapBeam, rabi_mhz)
from .spectrum import (DegenerateGeometryError, DopplerModel,
                       FitConvergenceError, GridError, InstrumentModel,
                       PeakNotFoundError, SpectrumSeries, TemperatureFit,
                       add_counting_noise, cavity_drift_compensate,
                       doppler_kernel, fit_temperature, fluorescence_spectrum,
                       fpi_transmission, measure_fwhm, reference_spectrum,
                       systematic_bounds)
from .trap import (TrapWavelengthError, calibrate_light_shift, default_params,
                   doppler_geometry_summary, effective_detunings,
                   effective_rabi, peak_intensity, photon_scattering_rate,
                   trap_depth, trap_report)

__version__ = "0.1.0"
