"""Config parsing, time-tag binary format, series CSV, fit reports."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atomtrap import fileio
from atomtrap.constants import TWOPI
from atomtrap.correlate import g2_deterministic
from atomtrap.montecarlo import TimeTagStream, telegraph_signal
from atomtrap.spectrum import InstrumentModel, reference_spectrum
from atomtrap.trap import STRENGTH_RATIO_COOL_FP2, default_params

# -- config ---------------------------------------------------------------

FULL_TEXT = """
# comment line
[laser]
delta_cl_mhz = -31
delta_rp_mhz = 0.5

[trap]
depth_mk = 0.81
load_rate_hz = 0.3

[detection]
detection_efficiency = 0.002
atom_rate_cps = 3000

[geometry]
temperature_uk = 50
detection_axis = 0,0,1
beam = 1,0,0
beam = -1,0,0
beam = 0,1,0
beam = 0,-1,0
"""


def test_empty_config_is_bitwise_default():
    cfg = fileio.parse_config("")
    ref = default_params()
    for f in ("rabi_repump", "rabi_cool_fp2", "rabi_cool_fp3",
              "detuning_repump", "detuning_cool", "trap_depth_mK",
              "stark_coeff", "detection_efficiency", "background_rate",
              "atom_rate", "dark_rate_per_detector", "load_rate",
              "loss_rate", "hyperfine_flip_rate"):
        assert getattr(cfg.params, f) == getattr(ref, f), f
    assert cfg.instrument == InstrumentModel()
    assert cfg.doppler.temperature == pytest.approx(105e-6, abs=1e-18)
    assert cfg.trap_beam.power == 44e-3 and cfg.trap_beam.waist == 3.5e-6
    assert cfg.envelope.amplitude == 0.24
    assert cfg.envelope.rate == pytest.approx(1 / 1.8e-6)


def test_full_config_round():
    cfg = fileio.parse_config(FULL_TEXT)
    assert cfg.params.detuning_cool == pytest.approx(-TWOPI * 31e6)
    assert cfg.params.detuning_repump == pytest.approx(TWOPI * 0.5e6)
    assert cfg.params.trap_depth_mK == 0.81
    assert cfg.params.load_rate == 0.3
    assert cfg.params.detection_efficiency == 0.002
    assert cfg.params.atom_rate == 3000.0
    assert cfg.doppler.temperature == pytest.approx(50e-6, abs=1e-18)
    g = cfg.params.beam_geometry
    assert len(g.beams) == 4
    assert np.allclose(g.g_factors(), np.sqrt(2.0))


def test_intensity_and_rabi_keys():
    ref = default_params()
    cfg = fileio.parse_config("[laser]\nintensity_cl_mw_cm2 = 206\n")
    assert cfg.params.rabi_cool_fp3 / ref.rabi_cool_fp3 == pytest.approx(
        math.sqrt(2.0), rel=1e-12)
    cfg = fileio.parse_config("[laser]\nrabi_cl_f3_mhz = 20\n")
    assert cfg.params.rabi_cool_fp3 == pytest.approx(TWOPI * 20e6)
    assert cfg.params.rabi_cool_fp2 == pytest.approx(
        TWOPI * 20e6 * math.sqrt(STRENGTH_RATIO_COOL_FP2))


def test_overrides_win():
    cfg = fileio.parse_config("[trap]\ndepth_mk = 0.38\n",
                              overrides=["depth_mk=0.81", "temperature_uk=20"])
    assert cfg.params.trap_depth_mK == 0.81
    assert cfg.doppler.temperature == pytest.approx(20e-6, abs=1e-18)


def test_sectionless_keys_accepted():
    cfg = fileio.parse_config("depth_mk = 0.5\nfinesse = 200\n")
    assert cfg.params.trap_depth_mK == 0.5
    assert cfg.instrument.finesse == 200.0


@pytest.mark.parametrize("text,frag,overrides", [
    ("[detection]\ndetection_efficiency = 1.5\n", ":2:", None),
    ("[detection]\ndetection_efficiency = 1.5\n", "outside allowed range", None),
    ("[laser]\nfoo_bar = 3\n", "unknown key 'foo_bar'", None),
    ("delta_cl = -31\n", "unit-suffix mismatch", None),
    ("delta_cl_ghz = -31\n", "delta_cl_mhz", None),
    ("[trap]\ndelta_cl_mhz = -31\n", "belongs to [laser]", None),
    ("depth_mk = 1\ndepth_mk = 2\n", "duplicate key", None),
    ("[lasers]\n", "unknown section", None),
    ("depth_mk = abc\n", "not a number", None),
    ("", "unknown key", ["nope=1"]),
    ("[geometry]\ndetection_axis = 0,0,0\n", "nonzero", None),
    ("[geometry]\nbeam = 1,0,0,0.5\nbeam = 0,1,0\n", "all beams or on none", None),
])
def test_config_error_messages(text, frag, overrides):
    with pytest.raises(fileio.ConfigError, match=None) as exc:
        fileio.parse_config(text, overrides=overrides)
    assert frag in str(exc.value)


def test_read_config_from_disk(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(FULL_TEXT)
    cfg = fileio.read_config(path)
    assert cfg.params.trap_depth_mK == 0.81
    with pytest.raises(fileio.ParseError):
        fileio.read_config(tmp_path / "absent.cfg")
    bad = tmp_path / "bad.cfg"
    bad.write_bytes(b"\xff\xfe\x00 depth")
    with pytest.raises(fileio.ParseError):
        fileio.read_config(bad)


# -- time tags -------------------------------------------------------------

@pytest.fixture(scope="module")
def stream():
    rng = np.random.default_rng(77)
    n = 4000
    t = np.sort(rng.choice(np.arange(1, 10_000_000, dtype=np.uint64),
                           size=n, replace=False))
    ch = (rng.random(n) < 0.5).astype(np.uint8)
    # de-duplicate within channels by construction (global times unique)
    return TimeTagStream(t, ch, live_time_ps=10_000_000)


def test_ttag_round_trip_multichunk(stream, tmp_path):
    path = tmp_path / "tags.ttag"
    fileio.write_timetags(stream, path)
    back = fileio.read_timetags(path, chunk_records=64)
    assert np.array_equal(back.timestamps, stream.timestamps)
    assert np.array_equal(back.channels, stream.channels)
    assert back.live_time_ps == stream.live_time_ps


def test_ttag_empty_stream(tmp_path):
    path = tmp_path / "none.ttag"
    empty = TimeTagStream(np.empty(0, np.uint64), np.empty(0, np.uint8), 1000)
    fileio.write_timetags(empty, path)
    back = fileio.read_timetags(path)
    assert back.timestamps.size == 0 and back.live_time_ps == 1000


GOOD_HEADER = b"#TTAG v1 live_time_ps=1000\n"


def packed(times, chans):
    rec = np.zeros(len(times), dtype=fileio.TTAG_DTYPE)
    rec["t"], rec["ch"] = times, chans
    return rec.tobytes()


@pytest.mark.parametrize("blob,frag", [
    (b"#TTAG v2 live_time_ps=5\n", "bad magic"),
    (GOOD_HEADER + packed([10, 30, 20], [0, 0, 0])[:-3], "truncated record"),
    (GOOD_HEADER + packed([10, 30, 20], [0, 0, 0]), "channel 0 at record 2"),
    (GOOD_HEADER + packed([10, 20], [0, 5]), "invalid channel 5 at record 1"),
    (b"#TTAG" + b"x" * 300, "header"),
    (GOOD_HEADER + packed([10, 50, 30], [0, 0, 1]), "not sorted"),
])
def test_ttag_corruption_detected(tmp_path, blob, frag):
    path = tmp_path / "bad.ttag"
    path.write_bytes(blob)
    with pytest.raises(fileio.ParseError) as exc:
        fileio.read_timetags(path)
    assert frag in str(exc.value)


def test_ttag_csv_round_trip(stream, tmp_path):
    path = tmp_path / "tags.csv"
    fileio.write_timetags_csv(stream, path)
    back = fileio.read_timetags_csv(path)
    assert np.array_equal(back.timestamps, stream.timestamps)
    assert np.array_equal(back.channels, stream.channels)
    assert back.live_time_ps == stream.live_time_ps


# -- series CSV -------------------------------------------------------------

def test_correlation_series_round_trip(tmp_path, params):
    tau = np.linspace(0, 200e-9, 101)
    ser = g2_deterministic(params, tau)
    p1, p2 = tmp_path / "corr.csv", tmp_path / "corr2.csv"
    fileio.write_series(ser, p1)
    doc = fileio.read_series(p1)
    assert doc.kind == "correlation" and doc.payload.kind == "deterministic"
    assert np.array_equal(doc.payload.tau, ser.tau)
    assert np.array_equal(doc.payload.g2, ser.g2)
    # write(read(x)) reproduces x byte for byte
    fileio.write_series(doc.payload, p2, header=doc.header)
    assert p1.read_bytes() == p2.read_bytes()


def test_spectrum_series_round_trip(tmp_path):
    ref = reference_spectrum(InstrumentModel(),
                             np.arange(-6.0, 6.0 + 1e-9, 0.02))
    path = tmp_path / "spec.csv"
    fileio.write_series(ref, path)
    assert path.read_text().splitlines()[0] == "#SPEC v1"
    doc = fileio.read_series(path)
    assert doc.kind == "spectrum"
    assert np.array_equal(doc.payload.detuning, ref.detuning)
    assert np.array_equal(doc.payload.value, ref.value)


def test_telegraph_series_round_trip(tmp_path, params):
    tele = telegraph_signal(params, duration=50.0, bin_width=0.1, seed=11)
    path = tmp_path / "tele.csv"
    fileio.write_series(tele, path)
    doc = fileio.read_series(path)
    assert doc.kind == "telegraph"
    assert np.array_equal(doc.payload.counts, tele.counts)
    assert doc.payload.bin_width == pytest.approx(0.1, abs=1e-15)


@pytest.mark.parametrize("text,frag", [
    ("#NOPE v1\nx,y\n", "unrecognized format"),
    ("#SPEC v1\nwrong,cols,here\n", "column header"),
    ("#SPEC v1\ndetuning_mhz,value,sigma\n1,2,zzz\n", "non-numeric"),
    ("#SPEC v1\ndetuning_mhz,value,sigma\n1,2\n", "expected 3 columns, got 2"),
    ("", "empty file"),
])
def test_series_malformed(tmp_path, text, frag):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(fileio.ParseError) as exc:
        fileio.read_series(path)
    assert frag in str(exc.value)


def test_fit_report_round_trip(tmp_path):
    fields = {"E_kin_uK": 104.93, "stat_err_uK": 12.2, "sys_low_uK": 61.9,
              "sys_high_uK": float("inf"), "chi2_red": 1.02,
              "clamped_at_zero": 0}
    path = tmp_path / "fit.txt"
    fileio.write_fit_report(path, fields)
    got = fileio.read_fit_report(path)
    assert got["E_kin_uK"] == 104.93
    assert math.isinf(got["sys_high_uK"])
    assert got["clamped_at_zero"] == 0.0


# -- fuzzing: parsers reject garbage with located errors, never crash --------

CONFIG_CHARS = st.sampled_from(list("abdelmkz_=[]#,.0123456789 \n-\t"))
config_texts = st.one_of(
    st.text(max_size=300),
    st.text(alphabet=CONFIG_CHARS, max_size=300),
)


@settings(max_examples=200, deadline=None)
@given(text=config_texts)
def test_parse_config_never_crashes(text):
    try:
        fileio.parse_config(text)
    except fileio.ConfigError as e:
        assert str(e)


@settings(max_examples=100, deadline=None)
@given(text=st.text(max_size=120))
def test_override_never_crashes(text):
    try:
        fileio.parse_config("", overrides=[text])
    except fileio.ConfigError as e:
        assert str(e)


series_blobs = st.one_of(
    st.binary(max_size=300),
    st.binary(max_size=200).map(
        lambda b: b"#SPEC v1\ndetuning_mhz,value,sigma\n" + b),
    st.binary(max_size=200).map(lambda b: b"#TTAG v1 live_time_ps=99\n" + b),
)


@settings(max_examples=200, deadline=None)
@given(blob=series_blobs)
def test_file_readers_never_crash(blob, tmp_path_factory):
    path = tmp_path_factory.getbasetemp() / "fuzz.bin"
    path.write_bytes(blob)
    for reader in (fileio.read_series, fileio.read_timetags,
                   fileio.read_fit_report, fileio.read_timetags_csv):
        try:
            reader(path)
        except fileio.ParseError as e:
            assert str(e)
