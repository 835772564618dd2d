"""On-disk formats: config files, binary time tags, CSV series, fit reports.

Formats are versioned by their first header line and pinned little-endian,
so outputs are byte-identical across platforms. All frequencies cross this
boundary in ordinary MHz and are converted to angular rad/s exactly once,
here.
"""

from __future__ import annotations

import difflib
import io
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .constants import RB87, TWOPI
from .correlate import SERIES_KINDS, CorrelationSeries, DiffusionEnvelope
from .montecarlo import TelegraphTrace, TimeTagStream
from .params import BeamGeometry, ExperimentParams, TrapBeam
from .spectrum import DopplerModel, InstrumentModel, SpectrumSeries
from .trap import (ANCHOR_DETUNING_COOL, ANCHOR_INTENSITY_COOL,
                   STRENGTH_RATIO_COOL_FP2, STRENGTH_RATIO_REPUMP,
                   calibrate_light_shift, line_strength_from_rabi,
                   rabi_from_intensity)


class ParseError(ValueError):
    """Malformed on-disk artifact; carries (source, line)."""

    def __init__(self, message: str, source: str = "<data>", line: int | None = None):
        self.source = source
        self.line = line
        where = source if line is None else f"{source}:{line}"
        super().__init__(f"{where}: {message}")


class ConfigError(ParseError):
    """Invalid configuration text."""


TTAG_MAGIC = "#TTAG v1"
TTAG_DTYPE = np.dtype([("t", "<u8"), ("ch", "u1")])

_MHZ = TWOPI * 1e6   # config MHz -> internal angular rad/s


def _fmt(x) -> str:
    """Shortest round-trip decimal representation."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


# -- config grammar -----------------------------------------------------------

# key -> (section, kind); kind: f = float, s = string, v = vector
_CONFIG_KEYS: dict[str, tuple[str, str]] = {
    "delta_cl_mhz": ("laser", "f"),
    "delta_rp_mhz": ("laser", "f"),
    "intensity_cl_mw_cm2": ("laser", "f"),
    "intensity_rp_mw_cm2": ("laser", "f"),
    "rabi_rp_mhz": ("laser", "f"),
    "rabi_cl_f2_mhz": ("laser", "f"),
    "rabi_cl_f3_mhz": ("laser", "f"),
    "i_sat_mw_cm2": ("laser", "f"),
    "strength_ratio_f2": ("laser", "f"),
    "strength_ratio_rp": ("laser", "f"),
    "laser_fwhm_mhz": ("laser", "f"),
    "laser_lineshape": ("laser", "s"),
    "depth_mk": ("trap", "f"),
    "stark_mhz_per_mk": ("trap", "f"),
    "power_mw": ("trap", "f"),
    "waist_um": ("trap", "f"),
    "wavelength_nm": ("trap", "f"),
    "load_rate_hz": ("trap", "f"),
    "loss_rate_hz": ("trap", "f"),
    "hyperfine_flip_hz": ("trap", "f"),
    "envelope_amplitude": ("trap", "f"),
    "envelope_tau_us": ("trap", "f"),
    "detection_efficiency": ("detection", "f"),
    "dark_rate_cps": ("detection", "f"),
    "background_rate_cps": ("detection", "f"),
    "atom_rate_cps": ("detection", "f"),
    "fpi_fwhm_mhz": ("detection", "f"),
    "finesse": ("detection", "f"),
    "peak_transmission": ("detection", "f"),
    "temperature_uk": ("geometry", "f"),
    "detection_axis": ("geometry", "v"),
    "beam": ("geometry", "v"),
}
_SECTIONS = ("laser", "trap", "detection", "geometry")

# (key, low, high, closed_low, closed_high) range rules checked at the line
_RANGES: dict[str, tuple[float, float, bool, bool]] = {
    "detection_efficiency": (0.0, 1.0, True, True),
    "peak_transmission": (0.0, 1.0, False, True),
    "intensity_cl_mw_cm2": (0.0, math.inf, True, False),
    "intensity_rp_mw_cm2": (0.0, math.inf, True, False),
    "i_sat_mw_cm2": (0.0, math.inf, False, False),
    "strength_ratio_f2": (0.0, math.inf, False, False),
    "strength_ratio_rp": (0.0, math.inf, False, False),
    "laser_fwhm_mhz": (0.0, math.inf, False, False),
    "fpi_fwhm_mhz": (0.0, math.inf, False, False),
    "finesse": (0.0, math.inf, False, False),
    "depth_mk": (0.0, math.inf, True, False),
    "power_mw": (0.0, math.inf, True, False),
    "waist_um": (0.0, math.inf, False, False),
    "wavelength_nm": (0.0, math.inf, False, False),
    "load_rate_hz": (0.0, math.inf, True, False),
    "loss_rate_hz": (0.0, math.inf, True, False),
    "hyperfine_flip_hz": (0.0, math.inf, True, False),
    "envelope_amplitude": (0.0, math.inf, True, False),
    "envelope_tau_us": (0.0, math.inf, False, False),
    "dark_rate_cps": (0.0, math.inf, True, False),
    "background_rate_cps": (0.0, math.inf, True, False),
    "atom_rate_cps": (0.0, math.inf, True, False),
    "temperature_uk": (0.0, math.inf, True, False),
    "rabi_rp_mhz": (0.0, math.inf, True, False),
    "rabi_cl_f2_mhz": (0.0, math.inf, True, False),
    "rabi_cl_f3_mhz": (0.0, math.inf, True, False),
}


@dataclass
class RunConfig:
    """Everything one run needs, assembled from defaults plus a config file."""

    params: ExperimentParams
    instrument: InstrumentModel
    doppler: DopplerModel
    trap_beam: TrapBeam
    envelope: DiffusionEnvelope
    values: dict = field(default_factory=dict)   # effective key -> value


def _unknown_key_message(key: str) -> str:
    hit = difflib.get_close_matches(key, _CONFIG_KEYS, n=1, cutoff=0.6)
    if hit:
        known = hit[0]
        stem = known.rsplit("_", 1)[0]
        if key == stem or (key.startswith(stem + "_") and key != known):
            return (f"unknown key '{key}': unit-suffix mismatch, "
                    f"did you mean '{known}'?")
        return f"unknown key '{key}': did you mean '{known}'?"
    return f"unknown key '{key}'"


def _parse_float(raw: str, key: str, source: str, line: int) -> float:
    try:
        val = float(raw)
    except ValueError:
        raise ConfigError(f"value for '{key}' is not a number: {raw!r}",
                          source, line) from None
    if not math.isfinite(val):
        raise ConfigError(f"value for '{key}' must be finite", source, line)
    if key in _RANGES:
        lo, hi, cl, ch = _RANGES[key]
        ok = (val >= lo if cl else val > lo) and (val <= hi if ch else val < hi)
        if not ok:
            bounds = f"{'[' if cl else '('}{lo}, {hi}{']' if ch else ')'}"
            raise ConfigError(f"'{key}' = {val} outside allowed range {bounds}",
                              source, line)
    return val


def _parse_vector(raw: str, key: str, source: str, line: int) -> tuple[float, ...]:
    parts = [p.strip() for p in raw.split(",")]
    try:
        vec = tuple(float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"'{key}' needs comma-separated numbers, got {raw!r}",
                          source, line) from None
    if key == "detection_axis" and len(vec) != 3:
        raise ConfigError("'detection_axis' needs exactly 3 components",
                          source, line)
    if key == "beam" and len(vec) not in (3, 4):
        raise ConfigError("'beam' needs 'x,y,z' or 'x,y,z,weight'", source, line)
    return vec


def parse_config(text: str, overrides: list[str] | None = None,
                 source: str = "<config>") -> RunConfig:
    """Parse key = value lines in [laser]/[trap]/[detection]/[geometry].

    Empty text yields the reference defaults. Keys may appear without a
    section header but never in the wrong section; unknown or duplicated
    keys are hard errors naming the line. `overrides` are extra 'key=value'
    strings applied after the file (the CLI's --override path).
    """
    entries: dict[str, tuple[str, str, int]] = {}   # key -> (raw, source, line)
    beams: list[tuple[tuple[float, ...], str, int]] = []
    current = None
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        stripped = rawline.strip()
        if not stripped or stripped.startswith(("#", ";")):
            continue
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ConfigError("malformed section header", source, lineno)
            name = stripped[1:-1].strip().lower()
            if name not in _SECTIONS:
                raise ConfigError(
                    f"unknown section [{name}]; sections are "
                    + ", ".join(f"[{s}]" for s in _SECTIONS), source, lineno)
            current = name
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected 'key = value', got {stripped!r}",
                              source, lineno)
        key, _, raw = stripped.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(_unknown_key_message(key), source, lineno)
        section, kind = _CONFIG_KEYS[key]
        if current is not None and current != section:
            raise ConfigError(f"key '{key}' belongs to [{section}], "
                              f"not [{current}]", source, lineno)
        if key == "beam":
            beams.append((_parse_vector(raw, key, source, lineno), source, lineno))
            continue
        if key in entries:
            raise ConfigError(f"duplicate key '{key}' (first at line "
                              f"{entries[key][2]})", source, lineno)
        entries[key] = (raw, source, lineno)

    for i, ov in enumerate(overrides or [], start=1):
        if "=" not in ov:
            raise ConfigError(f"override must be key=value, got {ov!r}",
                              "<override>", i)
        key, _, raw = ov.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(_unknown_key_message(key), "<override>", i)
        if key == "beam":
            beams.append((_parse_vector(raw, key, "<override>", i), "<override>", i))
        else:
            entries[key] = (raw, "<override>", i)

    return _assemble(entries, beams)


def read_config(path: str, overrides: list[str] | None = None) -> RunConfig:
    """Load and parse a config file (UTF-8)."""
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", str(path)) from exc
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"config is not valid UTF-8: {exc}", str(path)) from exc
    return parse_config(text, overrides, source=str(path))


def _assemble(entries, beams) -> RunConfig:
    vals: dict = {}
    lines: dict[str, tuple[str, int]] = {}
    for key, (raw, src, lineno) in entries.items():
        kind = _CONFIG_KEYS[key][1]
        if kind == "f":
            vals[key] = _parse_float(raw, key, src, lineno)
        elif kind == "v":
            vals[key] = _parse_vector(raw, key, src, lineno)
        else:
            vals[key] = raw
        lines[key] = (src, lineno)

    def get(key, default):
        return vals.get(key, default)

    def where(key):
        return lines.get(key, ("<config>", None))

    # geometry
    axis = get("detection_axis", (1.0, 1.0, 1.0))
    norm = math.sqrt(sum(c * c for c in axis))
    if norm <= 0:
        raise ConfigError("'detection_axis' must be a nonzero vector", *where("detection_axis"))
    axis = tuple(c / norm for c in axis)
    if beams:
        n_weighted = sum(1 for b, _, _ in beams if len(b) == 4)
        if n_weighted not in (0, len(beams)):
            _, src, lineno = beams[-1]
            raise ConfigError("give weights on all beams or on none", src, lineno)
        parsed = []
        for b, src, lineno in beams:
            bn = math.sqrt(b[0] ** 2 + b[1] ** 2 + b[2] ** 2)
            if bn <= 0:
                raise ConfigError("'beam' direction must be nonzero", src, lineno)
            w = b[3] if len(b) == 4 else 1.0
            if w <= 0:
                raise ConfigError("'beam' weight must be positive", src, lineno)
            parsed.append(((b[0] / bn, b[1] / bn, b[2] / bn), w))
        total = sum(w for _, w in parsed)
        geometry = BeamGeometry(
            beams=tuple((d, w / total) for d, w in parsed),
            detection_axis=axis)
    else:
        geometry = BeamGeometry(detection_axis=axis)

    # laser / calibration chain: anchors fix eta and the F'=3 Rabi rate at
    # the reference intensity; everything else scales from there
    i_sat = get("i_sat_mw_cm2", RB87.i_sat)
    i_cl = get("intensity_cl_mw_cm2", 103.0)
    i_rp = get("intensity_rp_mw_cm2", 12.0)
    ratio_f2 = get("strength_ratio_f2", STRENGTH_RATIO_COOL_FP2)
    ratio_rp = get("strength_ratio_rp", STRENGTH_RATIO_REPUMP)
    eta, rabi3_anchor = calibrate_light_shift()
    s3 = line_strength_from_rabi(rabi3_anchor, ANCHOR_INTENSITY_COOL, i_sat)
    rabi3 = get("rabi_cl_f3_mhz", None)
    if rabi3 is not None:
        rabi3 = rabi3 * _MHZ
    elif i_cl == ANCHOR_INTENSITY_COOL:
        rabi3 = rabi3_anchor   # bit-exact at the calibration point
    else:
        rabi3 = rabi_from_intensity(i_cl, s3, i_sat)
    rabi2 = get("rabi_cl_f2_mhz", None)
    rabi2 = rabi2 * _MHZ if rabi2 is not None else rabi3 * math.sqrt(ratio_f2)
    rabi1 = get("rabi_rp_mhz", None)
    rabi1 = rabi1 * _MHZ if rabi1 is not None else rabi_from_intensity(
        i_rp, s3 * ratio_rp, i_sat)
    stark = get("stark_mhz_per_mk", None)
    stark = stark * _MHZ if stark is not None else eta

    try:
        params = ExperimentParams(
            rabi_repump=rabi1,
            rabi_cool_fp2=rabi2,
            rabi_cool_fp3=rabi3,
            detuning_repump=get("delta_rp_mhz", 0.0) * _MHZ,
            detuning_cool=(vals["delta_cl_mhz"] * _MHZ if "delta_cl_mhz" in vals
                           else ANCHOR_DETUNING_COOL),
            trap_depth_mK=get("depth_mk", 0.38),
            stark_coeff=stark,
            intensity_cool=i_cl,
            intensity_repump=i_rp,
            detection_efficiency=get("detection_efficiency", 1e-3),
            background_rate=get("background_rate_cps", 450.0),
            atom_rate=get("atom_rate_cps", 2250.0),
            dark_rate_per_detector=get("dark_rate_cps", 300.0),
            load_rate=get("load_rate_hz", 0.2),
            loss_rate=get("loss_rate_hz", 1.0 / 2.2),
            hyperfine_flip_rate=get("hyperfine_flip_hz", 0.1),
            beam_geometry=geometry,
        )
        instrument = InstrumentModel(
            fpi_fwhm=get("fpi_fwhm_mhz", 0.45),
            finesse=get("finesse", 370.0),
            peak_transmission=get("peak_transmission", 0.40),
            laser_fwhm=get("laser_fwhm_mhz", 0.6),
            laser_lineshape=get("laser_lineshape", "lorentzian"),
        )
        doppler = DopplerModel(
            temperature=get("temperature_uk", 105.0) * 1e-6,
            geometry=geometry,
        )
        trap_beam = TrapBeam(
            power=get("power_mw", 44.0) * 1e-3,
            waist=get("waist_um", 3.5) * 1e-6,
            wavelength=get("wavelength_nm", 856.0) * 1e-9,
        )
        envelope = DiffusionEnvelope(
            amplitude=get("envelope_amplitude", 0.24),
            rate=1.0 / (get("envelope_tau_us", 1.8) * 1e-6),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    return RunConfig(params=params, instrument=instrument, doppler=doppler,
                     trap_beam=trap_beam, envelope=envelope, values=vals)


# -- binary time tags ---------------------------------------------------------

def write_timetags(stream: TimeTagStream, path: str) -> None:
    """Binary time-tag file: ASCII header, then (uint64 ps, uint8) records."""
    arr = np.empty(stream.timestamps.size, dtype=TTAG_DTYPE)
    arr["t"] = stream.timestamps
    arr["ch"] = stream.channels
    with open(path, "wb") as f:
        f.write(f"{TTAG_MAGIC} live_time_ps={stream.live_time_ps}\n".encode("ascii"))
        arr.tofile(f)


def read_timetags(path: str, chunk_records: int = 1 << 20) -> TimeTagStream:
    """Read and validate a binary time-tag file in bounded-memory chunks."""
    src = str(path)
    with open(path, "rb") as f:
        head = f.readline(256)
        if not head.endswith(b"\n"):
            raise ParseError("missing or oversized header line", src, 1)
        m = re.fullmatch(rf"{re.escape(TTAG_MAGIC)} live_time_ps=(\d+)",
                         head[:-1].decode("ascii", errors="replace"))
        if m is None:
            raise ParseError(f"bad magic; expected '{TTAG_MAGIC} live_time_ps=<n>'",
                             src, 1)
        live_time_ps = int(m.group(1))
        if live_time_ps <= 0:
            raise ParseError("live_time_ps must be positive", src, 1)

        chunks = []
        last = {0: -1, 1: -1}
        index = 0
        while True:
            block = f.read(chunk_records * TTAG_DTYPE.itemsize)
            if not block:
                break
            if len(block) % TTAG_DTYPE.itemsize:
                raise ParseError(
                    f"truncated record at byte {len(head) + index * TTAG_DTYPE.itemsize + len(block)}",
                    src)
            arr = np.frombuffer(block, dtype=TTAG_DTYPE)
            bad = np.flatnonzero(arr["ch"] > 1)
            if bad.size:
                raise ParseError(f"invalid channel {arr['ch'][bad[0]]} at record "
                                 f"{index + int(bad[0])}", src)
            t = arr["t"].astype(np.int64)
            for ch in (0, 1):
                idx = np.flatnonzero(arr["ch"] == ch)
                if idx.size == 0:
                    continue
                tc = t[idx]
                if tc[0] <= last[ch]:
                    raise ParseError(
                        f"non-monotonic timestamp in channel {ch} at record "
                        f"{index + int(idx[0])}", src)
                steps = np.flatnonzero(np.diff(tc) <= 0)
                if steps.size:
                    raise ParseError(
                        f"non-monotonic timestamp in channel {ch} at record "
                        f"{index + int(idx[steps[0] + 1])}", src)
                last[ch] = int(tc[-1])
            if chunks and t.size and chunks[-1]["t"][-1] > arr["t"][0]:
                raise ParseError(f"merged stream not sorted at record {index}", src)
            if np.any(np.diff(t) < 0):
                at = int(np.flatnonzero(np.diff(t) < 0)[0]) + 1
                raise ParseError(f"merged stream not sorted at record {index + at}",
                                 src)
            chunks.append(arr)
            index += arr.size

    if chunks:
        data = np.concatenate(chunks)
        return TimeTagStream(timestamps=data["t"], channels=data["ch"],
                             live_time_ps=live_time_ps)
    return TimeTagStream(timestamps=np.empty(0, np.uint64),
                         channels=np.empty(0, np.uint8),
                         live_time_ps=live_time_ps)


def write_timetags_csv(stream: TimeTagStream, path: str) -> None:
    """CSV export of a time-tag stream (same header semantics as binary)."""
    with open(path, "w", newline="\n") as f:
        f.write(f"{TTAG_MAGIC} live_time_ps={stream.live_time_ps}\n")
        f.write("time_ps,channel\n")
        for t, ch in zip(stream.timestamps, stream.channels):
            f.write(f"{int(t)},{int(ch)}\n")


def read_timetags_csv(path: str) -> TimeTagStream:
    src = str(path)
    try:
        with open(path, "r", encoding="utf-8", errors="strict") as f:
            lines = f.read().splitlines()
    except UnicodeDecodeError as exc:
        raise ParseError(f"not valid UTF-8: {exc}", src) from exc
    except OSError as exc:
        raise ParseError(f"cannot read: {exc}", src) from exc
    head = lines[0] if lines else ""
    m = re.fullmatch(rf"{re.escape(TTAG_MAGIC)} live_time_ps=(\d+)", head)
    if m is None:
        raise ParseError(f"bad magic; expected '{TTAG_MAGIC} live_time_ps=<n>'",
                         src, 1)
    if len(lines) < 2 or lines[1] != "time_ps,channel":
        raise ParseError("expected column header 'time_ps,channel'", src, 2)
    ts, chs = [], []
    for lineno, line in enumerate(lines[2:], start=3):
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"expected 2 columns, got {len(parts)}", src, lineno)
        try:
            ts.append(int(parts[0]))
            chs.append(int(parts[1]))
        except ValueError:
            raise ParseError(f"non-numeric cell {parts!r}", src, lineno) from None
    try:
        return TimeTagStream(np.asarray(ts, np.uint64), np.asarray(chs, np.uint8),
                             int(m.group(1)))
    except (ValueError, OverflowError) as exc:
        raise ParseError(str(exc), src) from exc


# -- CSV series ---------------------------------------------------------------

@dataclass
class ParsedDocument:
    """A parsed CSV artifact: kind tag, payload, verbatim '#' header lines."""

    kind: str
    payload: object
    header: list[str]
    source: str


_SERIES_FORMATS = {
    "correlation": ("#CORR v1", ("tau_s", "g2", "sigma")),
    "spectrum": ("#SPEC v1", ("detuning_mhz", "value", "sigma")),
    "telegraph": ("#TELE v1", ("bin_start_s", "counts")),
}


def _series_kind(obj) -> str:
    if isinstance(obj, CorrelationSeries):
        return "correlation"
    if isinstance(obj, SpectrumSeries):
        return "spectrum"
    if isinstance(obj, TelegraphTrace):
        return "telegraph"
    raise TypeError(f"no CSV format for {type(obj).__name__}")


def write_series(obj, path: str, header: list[str] | None = None) -> None:
    """Write a series CSV; `header` replaces the generated '#' lines verbatim."""
    kind = _series_kind(obj)
    magic, columns = _SERIES_FORMATS[kind]
    buf = io.StringIO()
    if header is not None:
        for line in header:
            if not line.startswith("#"):
                raise ValueError("header lines must start with '#'")
            buf.write(line + "\n")
    else:
        buf.write(magic + "\n")
        if kind == "correlation":
            buf.write(f"# kind = {obj.kind}\n")
        elif kind == "telegraph":
            buf.write(f"# bin_width_s = {_fmt(obj.bin_width)}\n")
    buf.write(",".join(columns) + "\n")

    if kind == "correlation":
        for t, g, s in zip(obj.tau, obj.g2, obj.sigma):
            buf.write(f"{_fmt(t)},{_fmt(g)},{_fmt(s)}\n")
    elif kind == "spectrum":
        for d, v, s in zip(obj.detuning, obj.value, obj.sigma):
            buf.write(f"{_fmt(d)},{_fmt(v)},{_fmt(s)}\n")
    else:
        for i, c in enumerate(obj.counts):
            buf.write(f"{_fmt(i * obj.bin_width)},{int(c)}\n")
    with open(path, "w", newline="\n") as f:
        f.write(buf.getvalue())


def read_series(path: str) -> ParsedDocument:
    """Read any series CSV, dispatching on the '#XXXX v1' magic line."""
    src = str(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = f.read().splitlines()
    except UnicodeDecodeError as exc:
        raise ParseError(f"not valid UTF-8: {exc}", src) from exc
    except OSError as exc:
        raise ParseError(f"cannot read: {exc}", src) from exc
    if not lines:
        raise ParseError("empty file", src, 1)

    kind = None
    for k, (magic, _) in _SERIES_FORMATS.items():
        if lines[0] == magic:
            kind = k
    if kind is None:
        raise ParseError("unrecognized format magic "
                         f"{lines[0][:40]!r}", src, 1)
    magic, columns = _SERIES_FORMATS[kind]

    header = []
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        header.append(lines[i])
        i += 1
    if i >= len(lines) or lines[i] != ",".join(columns):
        got = lines[i] if i < len(lines) else "<end of file>"
        raise ParseError(f"expected column header {','.join(columns)!r}, "
                         f"got {got!r}", src, i + 1)
    i += 1

    rows = []
    for lineno in range(i, len(lines)):
        line = lines[lineno]
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(columns):
            raise ParseError(f"expected {len(columns)} columns, got {len(parts)}",
                             src, lineno + 1)
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise ParseError(f"non-numeric cell in {line!r}", src,
                             lineno + 1) from None
    data = np.asarray(rows, dtype=float) if rows else np.empty((0, len(columns)))

    meta = {}
    for line in header[1:]:
        m = re.fullmatch(r"#\s*([A-Za-z0-9_]+)\s*=\s*(.*)", line)
        if m:
            meta[m.group(1)] = m.group(2).strip()

    try:
        if kind == "correlation":
            series_kind = meta.get("kind", "measured")
            if series_kind not in SERIES_KINDS:
                raise ParseError(f"unknown correlation kind {series_kind!r}", src)
            payload = CorrelationSeries(tau=data[:, 0], g2=data[:, 1],
                                        sigma=data[:, 2], kind=series_kind)
        elif kind == "spectrum":
            payload = SpectrumSeries(detuning=data[:, 0], value=data[:, 1],
                                     sigma=data[:, 2])
        else:
            if "bin_width_s" in meta:
                bin_width = float(meta["bin_width_s"])
            elif data.shape[0] >= 2:
                bin_width = float(data[1, 0] - data[0, 0])
            else:
                raise ParseError("telegraph needs bin_width_s or >= 2 rows", src)
            counts = data[:, 1]
            if np.any(counts != np.rint(counts)):
                raise ParseError("telegraph counts must be integers", src)
            payload = TelegraphTrace(bin_width=bin_width,
                                     counts=counts.astype(np.int64))
    except ParseError:
        raise
    except (ValueError, IndexError) as exc:
        raise ParseError(str(exc), src) from exc
    return ParsedDocument(kind=kind, payload=payload, header=header, source=src)


# -- fit reports --------------------------------------------------------------

def write_fit_report(path: str, fields: dict) -> None:
    """Flat key = value report block."""
    with open(path, "w", newline="\n") as f:
        for k, v in fields.items():
            f.write(f"{k} = {_fmt(v) if isinstance(v, (int, float, np.floating)) else v}\n")


def read_fit_report(path: str) -> dict[str, float]:
    out: dict[str, float] = {}
    src = str(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = f.read().splitlines()
    except UnicodeDecodeError as exc:
        raise ParseError(f"not valid UTF-8: {exc}", src) from exc
    except OSError as exc:
        raise ParseError(f"cannot read: {exc}", src) from exc
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        m = re.fullmatch(r"([A-Za-z0-9_]+)\s*=\s*(\S+)", line)
        if m is None:
            raise ParseError(f"expected 'key = value', got {line!r}", src, lineno)
        try:
            out[m.group(1)] = float(m.group(2))
        except ValueError:
            raise ParseError(f"non-numeric value {m.group(2)!r}",
                             src, lineno) from None
    return out
