"""Fabry-Perot instrument model, Doppler broadening, temperature extraction.

The elastically scattered fluorescence inherits the exciting laser's
spectrum, so the only atomic contribution to the measured line is the
Doppler broadening by the residual thermal motion. A scanning cavity
measures both the laser itself (reference) and the fluorescence; fitting
the fluorescence as reference * Gaussian with the Gaussian variance as
the single free parameter extracts the kinetic energy.

All detunings are in MHz relative to the laser carrier; spectra live on
uniform grids so convolutions are plain discrete sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .constants import RB87, PhysicalConstants
from .params import BeamGeometry

LINESHAPES = ("lorentzian", "gaussian")

_GAUSS_FWHM = 2.0 * math.sqrt(2.0 * math.log(2.0))   # FWHM = this * sigma


class GridError(ValueError):
    """Spectrum grid too coarse, too short, or non-uniform for the operation."""


class PeakNotFoundError(ValueError):
    """No interior transmission peak available for parabolic interpolation."""


class DegenerateGeometryError(ValueError):
    """All beams have zero projection on the detection axis."""


class FitConvergenceError(RuntimeError):
    """Temperature fit failed to converge."""


@dataclass
class SpectrumSeries:
    """Transmission or count rate versus cavity detuning.

    Parameters
    ----------
    detuning : ndarray
        Strictly increasing grid in MHz relative to the laser carrier.
    value : ndarray
        Non-negative transmission or count rate; unit-peak normalized
        spectra are required only where an operation says so.
    sigma : ndarray
        Per-point counting error (zero for synthetic noise-free spectra).
    """

    detuning: np.ndarray
    value: np.ndarray
    sigma: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.detuning = np.asarray(self.detuning, dtype=float)
        self.value = np.asarray(self.value, dtype=float)
        if self.sigma is None:
            self.sigma = np.zeros_like(self.value)
        self.sigma = np.asarray(self.sigma, dtype=float)
        if not (self.detuning.shape == self.value.shape == self.sigma.shape):
            raise ValueError("detuning, value and sigma must have equal shapes")
        if self.detuning.ndim != 1 or self.detuning.size < 2:
            raise ValueError("need a 1-d grid with at least two points")
        if np.any(np.diff(self.detuning) <= 0):
            raise ValueError("detuning grid must be strictly increasing")
        if np.any(self.value < 0):
            raise ValueError("spectral values must be non-negative")
        if np.any(self.sigma < 0):
            raise ValueError("sigma must be non-negative")

    def grid_step(self) -> float:
        """Uniform grid spacing in MHz; raises GridError if non-uniform."""
        d = np.diff(self.detuning)
        if d.max() - d.min() > 1e-9 * d.max():
            raise GridError("operation requires a uniform detuning grid")
        return float(d.mean())

    def peak_normalized(self) -> "SpectrumSeries":
        peak = self.value.max()
        if peak <= 0:
            raise ValueError("cannot normalize an all-zero spectrum")
        return SpectrumSeries(self.detuning.copy(), self.value / peak,
                              self.sigma / peak, dict(self.meta))


@dataclass(frozen=True)
class InstrumentModel:
    """Scanning cavity and excitation-laser parameters.

    The composite reference line is the cavity transmission convolved with
    the laser's own spectrum. `laser_lineshape` selects the model family
    for that composite: 'lorentzian' keeps the cavity's Airy profile
    (numerically Lorentzian near one order at this finesse) and a
    Lorentzian laser; 'gaussian' approximates both factors by Gaussians of
    the same widths, bracketing the plausible shapes from the other side.
    """

    fpi_fwhm: float = 0.45            # MHz, cavity resolution
    finesse: float = 370.0
    peak_transmission: float = 0.40
    laser_fwhm: float = 0.6           # MHz
    laser_lineshape: str = "lorentzian"

    def __post_init__(self):
        if min(self.fpi_fwhm, self.finesse, self.peak_transmission,
               self.laser_fwhm) <= 0:
            raise ValueError("instrument parameters must be positive")
        if self.laser_lineshape not in LINESHAPES:
            raise ValueError(f"laser_lineshape must be one of {LINESHAPES}")

    @property
    def free_spectral_range(self) -> float:
        """MHz; cavity mode spacing, finesse times resolution."""
        return self.finesse * self.fpi_fwhm


@dataclass(frozen=True)
class DopplerModel:
    """Thermal broadening geometry: per-beam projections and weights.

    Each cooling beam Doppler-shifts its scattered light by
    g_j (nu0/c) v with g_j = |detection_axis - beam_axis| = 2 sin(theta/2),
    so a thermal 1-d velocity spread sqrt(kB T / m) maps onto a mixture of
    zero-mean frequency Gaussians with weights w_j.
    """

    temperature: float                      # K
    geometry: BeamGeometry = field(default_factory=BeamGeometry)
    nu0: float = RB87.c / RB87.lambda0      # Hz, carrier
    constants: PhysicalConstants = RB87

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.nu0 <= 0:
            raise ValueError("carrier frequency must be positive")

    def component_sigmas_mhz(self) -> np.ndarray:
        """Frequency std dev per beam, MHz: g_j (nu0/c) sqrt(kB T / m)."""
        c = self.constants
        v_rms = math.sqrt(c.kB * self.temperature / c.m)
        return self.geometry.g_factors() * (self.nu0 / c.c) * v_rms * 1e-6

    def effective_variance_mhz2(self) -> float:
        """Second moment of the mixture: sum_j w_j sigma_j^2."""
        return float(np.sum(self.geometry.weights()
                            * self.component_sigmas_mhz() ** 2))

    def variance_to_temperature_uk(self, variance_mhz2: float,
                                   g_squared: float | None = None) -> float:
        """Temperature (uK) whose thermal spread gives `variance_mhz2`."""
        if g_squared is None:
            g_squared = self.geometry.mean_g_squared()
        if g_squared <= 0:
            raise DegenerateGeometryError("no beam projects on the detection axis")
        c = self.constants
        per_kelvin = g_squared * (self.nu0 / c.c) ** 2 * (c.kB / c.m) * 1e-12
        return variance_mhz2 / per_kelvin * 1e6


def fpi_transmission(detuning_mhz, inst: InstrumentModel = InstrumentModel()):
    """Airy transmission of the scanning cavity.

    T(delta) = T_peak / (1 + M sin^2(pi delta / FSR)) with M chosen so the
    half-maximum points sit exactly fpi_fwhm apart; periodic in the free
    spectral range.
    """
    fsr = inst.free_spectral_range
    m = 1.0 / math.sin(math.pi * inst.fpi_fwhm / (2.0 * fsr)) ** 2
    s = np.sin(np.pi * np.asarray(detuning_mhz, dtype=float) / fsr)
    return inst.peak_transmission / (1.0 + m * s * s)


def _lineshape_samples(kind: str, fwhm: float, offsets: np.ndarray) -> np.ndarray:
    if kind == "gaussian":
        sig = fwhm / _GAUSS_FWHM
        return np.exp(-0.5 * (offsets / sig) ** 2)
    hw = fwhm / 2.0
    return hw * hw / (offsets * offsets + hw * hw)


def _convolve_same(values: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """'same'-mode convolution with a sum-normalized kernel."""
    s = kernel.sum()
    if s <= 0:
        raise ValueError("kernel must have positive weight")
    return np.convolve(values, kernel / s, mode="same")


def reference_spectrum(inst: InstrumentModel, grid_mhz: np.ndarray) -> SpectrumSeries:
    """Composite laser-through-cavity line on the given detuning grid.

    Numerical convolution of the cavity transmission (single order) with
    the laser lineshape, unit-peak normalized. The grid must span at least
    +-5 MHz and resolve the cavity: spacing <= fpi_fwhm / 10.
    """
    grid = np.asarray(grid_mhz, dtype=float)
    probe = SpectrumSeries(grid, np.zeros_like(grid))
    dx = probe.grid_step()
    if dx > inst.fpi_fwhm / 10.0 + 1e-12:
        raise GridError(
            f"grid spacing {dx:.4g} MHz too coarse; need <= fpi_fwhm/10 "
            f"= {inst.fpi_fwhm / 10.0:.4g} MHz")
    if grid[0] > -5.0 or grid[-1] < 5.0:
        raise GridError("grid must span at least -5 .. +5 MHz")

    offsets = grid - grid[(grid.size - 1) // 2]
    if inst.laser_lineshape == "gaussian":
        cavity = _lineshape_samples("gaussian", inst.fpi_fwhm, offsets)
    else:
        cavity = np.asarray(fpi_transmission(offsets, inst))
        cavity[np.abs(offsets) > inst.free_spectral_range / 2.0] = 0.0
    laser = _lineshape_samples(inst.laser_lineshape, inst.laser_fwhm, offsets)
    value = _convolve_same(laser, cavity)
    out = SpectrumSeries(grid.copy(), value,
                         meta={"instrument": inst, "role": "reference"})
    return out.peak_normalized()


def doppler_kernel(dop: DopplerModel):
    """Frequency-density of the thermal Doppler shifts (MHz argument).

    Returns a callable mixture of per-beam Gaussians. At T = 0 (or for
    beams with zero projection) components degenerate to a Dirac mass at
    zero; `discrete()` places those on the center sample, and the callable
    integrates only the finite-width part.
    """
    sigmas = dop.component_sigmas_mhz()
    weights = dop.geometry.weights()
    return _DopplerKernel(sigmas=sigmas, weights=weights)


@dataclass(frozen=True)
class _DopplerKernel:
    sigmas: np.ndarray
    weights: np.ndarray

    @property
    def is_identity(self) -> bool:
        return bool(np.all(self.sigmas <= 0))

    def variance_mhz2(self) -> float:
        return float(np.sum(self.weights * self.sigmas ** 2))

    def __call__(self, delta_mhz):
        d = np.asarray(delta_mhz, dtype=float)
        out = np.zeros_like(d)
        for w, s in zip(self.weights, self.sigmas):
            if s > 0:
                out += w * np.exp(-0.5 * (d / s) ** 2) / (s * math.sqrt(2 * math.pi))
        return out

    def discrete(self, dx: float, n_max: int) -> np.ndarray:
        """Sum-normalized samples on offsets k dx, odd length <= 2 n_max + 1."""
        reach = 6.0 * float(self.sigmas.max(initial=0.0))
        k = min(max(int(np.ceil(reach / dx)), 0), max(n_max, 0))
        offs = np.arange(-k, k + 1) * dx
        out = np.zeros(2 * k + 1)
        for w, s in zip(self.weights, self.sigmas):
            if s > dx * 1e-9:
                comp = np.exp(-0.5 * (offs / s) ** 2)
                out += w * comp / comp.sum()
            else:
                out[k] += w
        return out / out.sum()


def fluorescence_spectrum(reference: SpectrumSeries, dop: DopplerModel) -> SpectrumSeries:
    """Doppler-broadened copy of the reference line, unit-peak normalized."""
    ref = reference.peak_normalized()
    dx = ref.grid_step()
    kernel = doppler_kernel(dop)
    if kernel.is_identity:
        value = ref.value.copy()
    else:
        half = (ref.value.size - 1) // 2
        value = _convolve_same(ref.value, kernel.discrete(dx, half))
    out = SpectrumSeries(ref.detuning.copy(), value,
                         meta={"temperature_k": dop.temperature, "role": "fluorescence"})
    return out.peak_normalized()


def measure_fwhm(series: SpectrumSeries) -> float:
    """Full width at half maximum by linear interpolation, MHz.

    The peak must be interior and the half-max level must be crossed on
    both sides; accurate on grids finer than ~0.02 MHz.
    """
    x, y = series.detuning, series.value
    i = int(np.argmax(y))
    if i in (0, y.size - 1):
        raise PeakNotFoundError("maximum sits on the grid edge")
    half = y[i] / 2.0

    left = np.flatnonzero(y[:i] < half)
    right = np.flatnonzero(y[i:] < half)
    if left.size == 0 or right.size == 0:
        raise GridError("grid does not reach the half-maximum level")
    a = left[-1]
    x_lo = x[a] + (half - y[a]) / (y[a + 1] - y[a]) * (x[a + 1] - x[a])
    b = i + right[0]
    x_hi = x[b - 1] + (half - y[b - 1]) / (y[b] - y[b - 1]) * (x[b] - x[b - 1])
    return float(x_hi - x_lo)


def add_counting_noise(series: SpectrumSeries, peak_counts: float,
                       rng: np.random.Generator) -> SpectrumSeries:
    """Poisson photon-counting noise at the given peak count level.

    The attached sigma is the true standard deviation of the injected
    noise (square root of the expected counts, floored at one count), not
    the square root of the drawn sample; error bars estimated from single
    low-count samples would bias any weighted fit low.
    """
    if peak_counts <= 0:
        raise ValueError("peak_counts must be positive")
    scale = peak_counts / series.value.max()
    counts = rng.poisson(series.value * scale)
    sigma = np.sqrt(np.maximum(series.value * scale, 1.0)) / scale
    return SpectrumSeries(series.detuning.copy(), counts / scale, sigma,
                          dict(series.meta, peak_counts=peak_counts))


@dataclass(frozen=True)
class TemperatureFit:
    """Result of the single-parameter convolution fit.

    e_kin_uk follows the measured-number convention: it is the temperature
    (in uK) whose 1-d thermal velocity spread, projected through the beam
    geometry's mean squared g-factor, reproduces the fitted frequency
    variance. The raw variance is kept so other velocity conventions can
    be recomputed from it.
    """

    e_kin_uk: float
    stat_err_uk: float
    variance_mhz2: float
    variance_err_mhz2: float
    chi2_red: float
    clamped_at_zero: bool
    mean_g_squared: float
    n_points: int


def _fit_model(ref_values: np.ndarray, dx: float, variance: float) -> np.ndarray:
    if variance <= 0:
        return ref_values / ref_values.max()
    sig = math.sqrt(variance)
    k = min(max(int(np.ceil(6.0 * sig / dx)), 1), (ref_values.size - 1) // 2)
    offs = np.arange(-k, k + 1) * dx
    kern = np.exp(-0.5 * (offs / sig) ** 2)
    out = _convolve_same(ref_values, kern)
    return out / out.max()


def fit_temperature(reference_data: SpectrumSeries, fluor_data: SpectrumSeries,
                    dop_geometry: DopplerModel | BeamGeometry | None = None) -> TemperatureFit:
    """Weighted least-squares Doppler fit with one free parameter.

    The model is the measured reference profile (not an analytic shape)
    convolved with a zero-mean Gaussian; the Gaussian's variance is the
    single free lineshape parameter (the overall amplitude is a nuisance
    normalization, profiled out in closed form rather than pinned to the
    noisy sample maximum). Both spectra must share one uniform grid. A
    best fit at the zero boundary is clamped there and flagged. The
    statistical error is the 1-sigma point of the profiled chi-square
    (from the counting errors, or from residual scatter when no errors
    are given).
    """
    if dop_geometry is None:
        dop_geometry = DopplerModel(0.0)
    elif isinstance(dop_geometry, BeamGeometry):
        dop_geometry = DopplerModel(0.0, geometry=dop_geometry)

    if reference_data.detuning.shape != fluor_data.detuning.shape or \
            not np.allclose(reference_data.detuning, fluor_data.detuning,
                            rtol=0.0, atol=1e-9):
        raise GridError("reference and fluorescence must share one grid")
    dx = reference_data.grid_step()

    ref = reference_data.value / reference_data.value.max()
    flo_norm = fluor_data.value.max()
    y = fluor_data.value / flo_norm
    sig = fluor_data.sigma / flo_norm
    weighted = bool(np.any(sig > 0))
    w = 1.0 / np.where(sig > 0, sig, 1.0) ** 2 if weighted else np.ones_like(y)

    span = reference_data.detuning[-1] - reference_data.detuning[0]
    v_max = (span / 4.0) ** 2

    def chi2(v: float) -> float:
        m = _fit_model(ref, dx, v)
        amp = float(np.sum(w * y * m) / np.sum(w * m * m))
        r = y - amp * m
        return float(np.sum(w * r * r))

    res = minimize_scalar(chi2, bounds=(0.0, v_max), method="bounded",
                          options={"xatol": 1e-12})
    if not res.success:
        raise FitConvergenceError(str(res.message))
    v_fit = float(res.x)
    clamped = False
    if chi2(0.0) <= res.fun + 1e-12:
        v_fit, clamped = 0.0, True

    # 1-sigma from the curvature of the profiled chi-square
    h = max(v_fit * 1e-3, (dx / 4.0) ** 2)
    c0 = chi2(v_fit)
    if v_fit >= h:
        curv = (chi2(v_fit + h) - 2.0 * c0 + chi2(v_fit - h)) / (h * h)
    else:
        curv = (chi2(v_fit + 2 * h) - 2.0 * chi2(v_fit + h) + c0) / (h * h)
    dof = max(y.size - 2, 1)
    chi2_red = c0 / dof
    if curv <= 0:
        raise FitConvergenceError("flat fit landscape; cannot estimate error")
    var_err = math.sqrt(2.0 / curv)
    if not weighted:
        var_err *= math.sqrt(max(chi2_red, 0.0))

    g2_mean = dop_geometry.geometry.mean_g_squared()
    e_kin = dop_geometry.variance_to_temperature_uk(v_fit, g2_mean)
    e_err = dop_geometry.variance_to_temperature_uk(var_err, g2_mean)
    return TemperatureFit(e_kin_uk=e_kin, stat_err_uk=e_err,
                          variance_mhz2=v_fit, variance_err_mhz2=var_err,
                          chi2_red=chi2_red, clamped_at_zero=clamped,
                          mean_g_squared=g2_mean, n_points=int(y.size))


def systematic_bounds(fit: TemperatureFit, dop: DopplerModel) -> tuple[float, float]:
    """Bounds on E_kin (uK) from the unknown beam-to-beam scattering split.

    If the atom scattered only from the beam with the largest projection
    g_max, the observed broadening implies the least energy; the smallest
    nonzero projection gives the most. Returns (low, high) bracketing the
    central value; the high bound is inf when some beam has g = 0.
    """
    g = dop.geometry.g_factors()
    if np.all(g <= 0):
        raise DegenerateGeometryError("all beams have zero Doppler projection")
    g_max = float(g.max())
    g_min = float(g[g > 0].min())
    e_low = dop.variance_to_temperature_uk(fit.variance_mhz2, g_max ** 2)
    if np.any(g <= 0):
        e_high = math.inf
    else:
        e_high = dop.variance_to_temperature_uk(fit.variance_mhz2, g_min ** 2)
    return (min(e_low, e_high), max(e_low, e_high))


def _parabolic_peak(series: SpectrumSeries) -> float:
    """Peak detuning from the top three samples, MHz."""
    x, y = series.detuning, series.value
    i = int(np.argmax(y))
    if i in (0, y.size - 1):
        raise PeakNotFoundError("transmission peak not interior to the scan")
    denom = y[i - 1] - 2.0 * y[i] + y[i + 1]
    if denom >= 0:
        raise PeakNotFoundError("no local curvature at the maximum")
    shift = 0.5 * (y[i - 1] - y[i + 1]) / denom
    dx = x[i + 1] - x[i]
    return float(x[i] + shift * dx)


def cavity_drift_compensate(
        scans: list[tuple[SpectrumSeries, SpectrumSeries]]
) -> tuple[SpectrumSeries, SpectrumSeries]:
    """Re-reference alternating (reference, fluorescence) scan pairs.

    The cavity length drifts between scans; each reference scan's peak
    defines the instantaneous zero of the frequency axis, and the paired
    fluorescence scan inherits that shift. All shifted scans are
    interpolated onto the overlap of their grids and averaged (errors in
    quadrature).
    """
    if not scans:
        raise ValueError("need at least one scan pair")
    shifted: list[tuple[np.ndarray, SpectrumSeries, SpectrumSeries]] = []
    for ref, flo in scans:
        pk = _parabolic_peak(ref)
        shifted.append((ref.detuning - pk, ref, flo))

    lo = max(s[0][0] for s in shifted)
    hi = min(s[0][-1] for s in shifted)
    if hi <= lo:
        raise GridError("shifted scans do not overlap")
    dx = shifted[0][1].grid_step()
    grid = np.arange(lo, hi + dx * 1e-6, dx)

    def average(pick) -> SpectrumSeries:
        vals = np.stack([np.interp(grid, g, pick(r, f).value) for g, r, f in shifted])
        sigs = np.stack([np.interp(grid, g, pick(r, f).sigma) for g, r, f in shifted])
        return SpectrumSeries(grid.copy(), vals.mean(axis=0),
                              np.sqrt(np.sum(sigs ** 2, axis=0)) / len(shifted))

    return (average(lambda r, f: r), average(lambda r, f: f))
