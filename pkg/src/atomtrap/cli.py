"""Command-line surface: plot-ready CSV/binary artifacts for each capability.

Every subcommand is deterministic: the same config, overrides and seed
produce byte-identical output files (formats are endianness-pinned and
floats are written in shortest round-trip form). Exit codes: 0 success,
2 usage error, 3 data/parse error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import correlate, montecarlo, spectrum
from .bloch import DegenerateSteadyStateError, IntegrationError
from .correlate import EnvelopeFitError, InsufficientRangeError
from .fileio import (ConfigError, ParseError, RunConfig, parse_config,
                     read_config, read_series, write_fit_report, write_series,
                     write_timetags, write_timetags_csv)
from .montecarlo import EmptyStreamError, ThresholdRangeError
from .params import rabi_mhz
from .spectrum import (DegenerateGeometryError, FitConvergenceError,
                       GridError, PeakNotFoundError)
from .trap import (TrapWavelengthError, doppler_geometry_summary,
                   effective_detunings, trap_report)

DEFAULT_SEED = 123456789   # arbitrary fixed constant; all runs reproducible

_DATA_ERRORS = (ParseError, TrapWavelengthError, FileNotFoundError,
                IsADirectoryError, PermissionError)
_NUMERICAL_ERRORS = (IntegrationError, DegenerateSteadyStateError,
                     FitConvergenceError, PeakNotFoundError, GridError,
                     EmptyStreamError, ThresholdRangeError,
                     DegenerateGeometryError, EnvelopeFitError,
                     InsufficientRangeError)


class UsageError(ValueError):
    """Bad flag combination or value; maps to exit code 2."""


def _load_config(args) -> RunConfig:
    path = args.config or os.environ.get("ATOMTRAP_CONFIG")
    if path:
        return read_config(path, overrides=args.override)
    return parse_config("", overrides=args.override, source="<defaults>")


def _say(args, *parts):
    if not args.quiet:
        print(*parts)


def _outpath(args, name: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _echo_config(args, cfg: RunConfig):
    if not args.verbose or args.quiet:
        return
    r1, r2, r3 = rabi_mhz(cfg.params)
    d1, d2, d3 = (d / (2 * np.pi * 1e6) for d in effective_detunings(cfg.params))
    print(f"# depth {cfg.params.trap_depth_mK} mK; Rabi (rp, f2, f3) = "
          f"({r1:.4f}, {r2:.4f}, {r3:.4f}) MHz")
    print(f"# light-shifted detunings (rp, f2, f3) = "
          f"({d1:.4f}, {d2:.4f}, {d3:.4f}) MHz")
    for k, v in sorted(cfg.values.items()):
        print(f"# config {k} = {v}")


def cmd_g2(args) -> int:
    cfg = _load_config(args)
    _echo_config(args, cfg)
    if args.tau_max_ns < 0:
        raise UsageError("--tau-max-ns must be >= 0")
    if args.points < 1:
        raise UsageError("--points must be >= 1")
    if args.tau_max_ns == 0:
        grid = np.array([0.0])
    else:
        grid = np.linspace(0.0, args.tau_max_ns * 1e-9, args.points)
    bare = correlate.g2_deterministic(cfg.params, grid)
    damped = correlate.apply_envelope(bare, cfg.envelope)
    p_bare = _outpath(args, "g2_deterministic.csv")
    p_damp = _outpath(args, "g2_envelope.csv")
    write_series(bare, p_bare)
    write_series(damped, p_damp)
    i = int(np.argmax(bare.g2))
    _say(args, f"peak g2 = {bare.g2[i]:.4f} at |tau| = {abs(bare.tau[i]) * 1e9:.2f} ns")
    _say(args, f"wrote {p_bare}")
    _say(args, f"wrote {p_damp}")
    return 0


def cmd_hbt(args) -> int:
    cfg = _load_config(args)
    _echo_config(args, cfg)
    if args.duration_s <= 0:
        raise EmptyStreamError(
            "zero-duration run yields an empty detector stream")
    if args.bin_ns <= 0 or args.window_ns < args.bin_ns:
        raise UsageError("need --bin-ns > 0 and --window-ns >= --bin-ns")
    emissions = montecarlo.quantum_jump_emissions(
        cfg.params, args.duration_s, args.seed,
        n_segments=args.segments, max_workers=args.workers)
    stream = montecarlo.detection_chain(emissions, args.duration_s,
                                        cfg.params, args.seed)
    p_tags = _outpath(args, "hbt_timetags.ttag")
    write_timetags(stream, p_tags)
    _say(args, f"{emissions.size} emissions -> {stream.timestamps.size} tags; "
         f"wrote {p_tags}")
    if args.export_csv:
        p_csv = _outpath(args, "hbt_timetags.csv")
        write_timetags_csv(stream, p_csv)
        _say(args, f"wrote {p_csv}")
    hist = montecarlo.coincidence_histogram(
        stream, args.window_ns * 1e-9, args.bin_ns * 1e-9)
    raw = correlate.normalize_histogram(hist.counts, hist.tau, hist.rate1,
                                        hist.rate2, hist.bin_width,
                                        hist.live_time)
    dark = cfg.params.dark_rate_per_detector
    corrected = correlate.background_correct(raw, hist.rate1, hist.rate2,
                                             dark, dark)
    p_raw = _outpath(args, "hbt_g2.csv")
    p_cor = _outpath(args, "hbt_g2_corrected.csv")
    write_series(raw, p_raw)
    write_series(corrected, p_cor)
    mid = int(np.argmin(np.abs(raw.tau)))
    _say(args, f"g2(0) = {raw.g2[mid]:.3f} raw, {corrected.g2[mid]:.3f} "
         "background-corrected")
    _say(args, f"wrote {p_raw}")
    _say(args, f"wrote {p_cor}")
    return 0


def cmd_telegraph(args) -> int:
    cfg = _load_config(args)
    _echo_config(args, cfg)
    if args.duration_s <= 0 or args.bin_s <= 0:
        raise UsageError("need --duration-s > 0 and --bin-s > 0")
    trace = montecarlo.telegraph_signal(cfg.params, args.duration_s,
                                        args.bin_s, args.seed)
    p_trace = _outpath(args, "telegraph_trace.csv")
    write_series(trace, p_trace)
    values, freq = montecarlo.occupancy_histogram(trace)
    p_hist = _outpath(args, "telegraph_occupancy.csv")
    with open(p_hist, "w", newline="\n") as f:
        f.write("#OCCHIST v1\n")
        f.write(f"# bin_width_s = {trace.bin_width!r}\n")
        f.write("counts_per_bin,n_bins\n")
        for v, n in zip(values, freq):
            f.write(f"{int(v)},{int(n)}\n")
    threshold = args.threshold_cps
    if threshold is None:
        threshold = 0.5 * (cfg.params.background_rate + cfg.params.atom_rate)
    gates = montecarlo.threshold_gate(trace, threshold,
                                      cfg.params.background_rate,
                                      cfg.params.atom_rate)
    frac = montecarlo.detected_fraction(gates, trace.live_time)
    occ = float(trace.occupancy.mean()) if trace.occupancy is not None else float("nan")
    _say(args, f"occupancy {occ:.4f}; gated fraction {frac:.4f} at "
         f"{threshold:.0f} counts/s ({len(gates)} intervals)")
    _say(args, f"wrote {p_trace}")
    _say(args, f"wrote {p_hist}")
    return 0


def cmd_spectrum(args) -> int:
    cfg = _load_config(args)
    _echo_config(args, cfg)
    if args.mode == "synthesize":
        if args.grid_span_mhz <= 0 or args.grid_step_mhz <= 0:
            raise UsageError("need --grid-span-mhz > 0 and --grid-step-mhz > 0")
        grid = np.arange(-args.grid_span_mhz,
                         args.grid_span_mhz + args.grid_step_mhz * 1e-6,
                         args.grid_step_mhz)
        ref = spectrum.reference_spectrum(cfg.instrument, grid)
        fluor = spectrum.fluorescence_spectrum(ref, cfg.doppler)
        if args.noise_counts > 0:
            # noise models the single fluorescence scan; the reference line
            # is averaged over many sweeps and written clean
            rng = np.random.default_rng(args.seed)
            fluor = spectrum.add_counting_noise(fluor, args.noise_counts, rng)
        p_ref = _outpath(args, "spectrum_reference.csv")
        p_fluor = _outpath(args, "spectrum_fluorescence.csv")
        write_series(ref, p_ref)
        write_series(fluor, p_fluor)
        _say(args, f"reference FWHM {spectrum.measure_fwhm(ref):.4f} MHz; "
             f"fluorescence FWHM {spectrum.measure_fwhm(fluor):.4f} MHz")
        _say(args, f"wrote {p_ref}")
        _say(args, f"wrote {p_fluor}")
        return 0

    # fit mode
    if not args.reference or not args.fluorescence:
        raise UsageError("--mode fit needs --reference and --fluorescence")
    ref_doc = read_series(args.reference)
    fluor_doc = read_series(args.fluorescence)
    for doc in (ref_doc, fluor_doc):
        if doc.kind != "spectrum":
            raise ParseError(f"expected a spectrum file, got {doc.kind}",
                             doc.source)
    fit = spectrum.fit_temperature(ref_doc.payload, fluor_doc.payload,
                                   cfg.doppler)
    lo, hi = spectrum.systematic_bounds(fit, cfg.doppler)
    report = {
        "E_kin_uK": fit.e_kin_uk,
        "stat_err_uK": fit.stat_err_uk,
        "sys_low_uK": lo,
        "sys_high_uK": hi,
        "chi2_red": fit.chi2_red,
        "variance_MHz2": fit.variance_mhz2,
        "variance_err_MHz2": fit.variance_err_mhz2,
        "mean_g_squared": fit.mean_g_squared,
        "clamped_at_zero": int(fit.clamped_at_zero),
        "n_points": fit.n_points,
    }
    p_fit = _outpath(args, "temperature_fit.txt")
    write_fit_report(p_fit, report)
    _say(args, f"E_kin = {fit.e_kin_uk:.1f} +/- {fit.stat_err_uk:.1f} uK "
         f"(systematic bounds {lo:.1f} .. {hi:.1f} uK)")
    _say(args, f"wrote {p_fit}")
    return 0


def cmd_trap(args) -> int:
    cfg = _load_config(args)
    _echo_config(args, cfg)
    report = trap_report(cfg.trap_beam, cfg.params)
    report.update(doppler_geometry_summary(cfg.params.beam_geometry))
    p_rep = _outpath(args, "trap_report.txt")
    write_fit_report(p_rep, report)
    if not args.quiet:
        for k, v in report.items():
            print(f"{k} = {v!r}")
        print(f"wrote {p_rep}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="config file (fallback: $ATOMTRAP_CONFIG, "
                        "then built-in defaults)")
    common.add_argument("--override", metavar="K=V", action="append",
                        default=[], help="config override, repeatable; "
                        "same keys and validation as the config file")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED,
                        help=f"random seed (default {DEFAULT_SEED})")
    common.add_argument("--out", metavar="DIR", default=".",
                        help="output directory (default: current)")
    common.add_argument("--quiet", action="store_true",
                        help="suppress progress/summary lines")
    common.add_argument("--verbose", action="store_true",
                        help="echo the effective configuration")

    parser = argparse.ArgumentParser(
        prog="atomtrap",
        description="Single-atom dipole-trap fluorescence toolkit: "
        "correlation functions, photon streams, trap-occupancy telegraph "
        "signals, Doppler thermometry and trap-physics reports.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("g2", parents=[common],
                       help="deterministic intensity correlation g2(tau)")
    p.add_argument("--tau-max-ns", type=float, default=200.0,
                   help="largest lag in ns (default 200; 0 = single point)")
    p.add_argument("--points", type=int, default=801,
                   help="grid points on [0, tau_max] (default 801)")
    p.set_defaults(func=cmd_g2)

    p = sub.add_parser("hbt", parents=[common],
                       help="stochastic photon stream through a beam-splitter "
                       "detector pair, plus the correlation histogram")
    p.add_argument("--duration-s", type=float, default=2.0,
                   help="simulated acquisition time (default 2.0)")
    p.add_argument("--window-ns", type=float, default=150.0,
                   help="correlation window |tau| <= window (default 150)")
    p.add_argument("--bin-ns", type=float, default=2.0,
                   help="histogram bin width (default 2)")
    p.add_argument("--segments", type=int, default=32,
                   help="trajectory segments (default 32); results do not "
                   "depend on worker count, only on this and the seed")
    p.add_argument("--workers", type=int, default=1,
                   help="parallel workers for the emission stage (default 1)")
    p.add_argument("--export-csv", action="store_true",
                   help="also write the time tags as CSV")
    p.set_defaults(func=cmd_hbt)

    p = sub.add_parser("telegraph", parents=[common],
                       help="collisional-blockade loading/loss telegraph signal")
    p.add_argument("--duration-s", type=float, default=600.0,
                   help="simulated time (default 600)")
    p.add_argument("--bin-s", type=float, default=0.1,
                   help="counting bin (default 0.1)")
    p.add_argument("--threshold-cps", type=float, default=None,
                   help="atom-present threshold in counts/s "
                   "(default: midpoint of background and one-atom rates)")
    p.set_defaults(func=cmd_telegraph)

    p = sub.add_parser("spectrum", parents=[common],
                       help="cavity-filtered fluorescence spectra and "
                       "Doppler temperature fits")
    p.add_argument("--mode", choices=("synthesize", "fit"),
                   default="synthesize")
    p.add_argument("--grid-span-mhz", type=float, default=6.0,
                   help="synthesize: half-span of the detuning grid (default 6)")
    p.add_argument("--grid-step-mhz", type=float, default=0.01,
                   help="synthesize: grid step (default 0.01)")
    p.add_argument("--noise-counts", type=float, default=0.0,
                   help="synthesize: Poisson peak counts on the fluorescence "
                   "scan (default 0 = noise-free)")
    p.add_argument("--reference", metavar="PATH",
                   help="fit: reference (no-atom) spectrum CSV")
    p.add_argument("--fluorescence", metavar="PATH",
                   help="fit: fluorescence spectrum CSV")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("trap", parents=[common],
                       help="dipole-trap depth, scattering rate and "
                       "effective Rabi report")
    p.set_defaults(func=cmd_trap)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except _NUMERICAL_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
