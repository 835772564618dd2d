"""End-to-end runs of the command-line surface (in-process)."""

import numpy as np
import pytest

from atomtrap import fileio
from atomtrap.cli import DEFAULT_SEED, main


def run(tmp_path, *argv, code=0, extra_out=None):
    out = str(tmp_path if extra_out is None else tmp_path / extra_out)
    rc = main([*argv, "--out", out])
    assert rc == code, f"exit {rc} != {code} for {argv}"
    return out


def test_trap_report(tmp_path, capsys):
    out = run(tmp_path, "trap")
    rep = fileio.read_fit_report(f"{out}/trap_report.txt")
    assert rep["trap_depth_mK"] == pytest.approx(1.0, rel=0.10)
    assert rep["scattering_rate_per_s"] == pytest.approx(24.0, rel=0.15)
    assert rep["effective_rabi_at_config_depth_MHz"] == pytest.approx(47.5, rel=1e-6)
    assert rep["g_rms"] == pytest.approx(np.sqrt(2.0))
    assert "trap_depth_mK" in capsys.readouterr().out


def test_trap_zero_power_and_blue_detuned(tmp_path):
    out = run(tmp_path, "trap", "--override", "power_mw=0", "--quiet")
    rep = fileio.read_fit_report(f"{out}/trap_report.txt")
    assert rep["trap_depth_mK"] == 0.0
    assert rep["scattering_rate_per_s"] == 0.0
    run(tmp_path, "trap", "--override", "wavelength_nm=700", code=3)


def test_g2_outputs(tmp_path, capsys):
    out = run(tmp_path, "g2", "--points", "401")
    bare = fileio.read_series(f"{out}/g2_deterministic.csv").payload
    damped = fileio.read_series(f"{out}/g2_envelope.csv").payload
    mid = np.argmin(np.abs(bare.tau))
    assert bare.g2[mid] == 0.0
    assert bare.g2.max() > 2.0
    env0 = damped.g2[np.argmax(bare.g2)] / bare.g2[np.argmax(bare.g2)]
    assert 1.0 < env0 <= 1.24
    text = capsys.readouterr().out
    assert "peak g2" in text and "-" not in text.split("|tau| = ")[1][:6]


def test_g2_single_point(tmp_path):
    out = run(tmp_path, "g2", "--tau-max-ns", "0")
    bare = fileio.read_series(f"{out}/g2_deterministic.csv").payload
    assert bare.tau.tolist() == [0.0]
    assert bare.g2.tolist() == [0.0]


def test_g2_usage_errors(tmp_path):
    run(tmp_path, "g2", "--tau-max-ns", "-5", code=2)
    run(tmp_path, "g2", "--points", "0", code=2)


HBT_FAST = ("hbt", "--duration-s", "0.05", "--segments", "4",
            "--override", "detection_efficiency=1.0",
            "--override", "dark_rate_cps=0")


def test_hbt_pipeline_and_determinism(tmp_path):
    a = run(tmp_path, *HBT_FAST, "--export-csv", extra_out="a")
    b = run(tmp_path, *HBT_FAST, "--export-csv", "--workers", "4",
            extra_out="b")
    for name in ("hbt_timetags.ttag", "hbt_timetags.csv", "hbt_g2.csv",
                 "hbt_g2_corrected.csv"):
        with open(f"{a}/{name}", "rb") as f1, open(f"{b}/{name}", "rb") as f2:
            assert f1.read() == f2.read(), name

    stream = fileio.read_timetags(f"{a}/hbt_timetags.ttag")
    assert stream.timestamps.size > 40_000
    raw = fileio.read_series(f"{a}/hbt_g2.csv").payload
    assert raw.kind == "monte-carlo"
    assert raw.g2[np.argmin(np.abs(raw.tau))] < 0.2


def test_hbt_seed_changes_stream(tmp_path):
    a = run(tmp_path, *HBT_FAST, extra_out="a")
    b = run(tmp_path, *HBT_FAST, "--seed", "7", extra_out="b")
    with open(f"{a}/hbt_timetags.ttag", "rb") as f1, \
         open(f"{b}/hbt_timetags.ttag", "rb") as f2:
        assert f1.read() != f2.read()


def test_hbt_zero_duration_is_empty_stream_error(tmp_path):
    run(tmp_path, "hbt", "--duration-s", "0", code=4)


def test_telegraph_outputs(tmp_path, capsys):
    out = run(tmp_path, "telegraph", "--duration-s", "200")
    trace = fileio.read_series(f"{out}/telegraph_trace.csv").payload
    assert trace.counts.size == 2000
    lines = open(f"{out}/telegraph_occupancy.csv").read().splitlines()
    assert lines[0] == "#OCCHIST v1"
    assert lines[2] == "counts_per_bin,n_bins"
    n_bins = sum(int(l.split(",")[1]) for l in lines[3:])
    assert n_bins == trace.counts.size
    assert "occupancy" in capsys.readouterr().out
    run(tmp_path, "telegraph", "--threshold-cps", "100", code=4)  # below bg


def test_spectrum_round_trip_uniform_geometry(tmp_path):
    cfgfile = tmp_path / "uniform.cfg"
    cfgfile.write_text(
        "[geometry]\n"
        "temperature_uk = 105\n"
        "detection_axis = 0,0,1\n"
        "beam = 1,0,0\nbeam = -1,0,0\nbeam = 0,1,0\nbeam = 0,-1,0\n")
    args = ("--config", str(cfgfile))
    out = run(tmp_path, "spectrum", *args)
    fit_out = run(tmp_path, "spectrum", *args, "--mode", "fit",
                  "--reference", f"{out}/spectrum_reference.csv",
                  "--fluorescence", f"{out}/spectrum_fluorescence.csv")
    rep = fileio.read_fit_report(f"{fit_out}/temperature_fit.txt")
    assert rep["E_kin_uK"] == pytest.approx(105.0, rel=0.01)
    assert rep["clamped_at_zero"] == 0.0
    assert rep["mean_g_squared"] == pytest.approx(2.0)
    assert rep["sys_low_uK"] == pytest.approx(rep["sys_high_uK"])


def test_spectrum_reference_as_fluorescence_fits_zero(tmp_path):
    out = run(tmp_path, "spectrum")
    fit_out = run(tmp_path, "spectrum", "--mode", "fit",
                  "--reference", f"{out}/spectrum_reference.csv",
                  "--fluorescence", f"{out}/spectrum_reference.csv")
    rep = fileio.read_fit_report(f"{fit_out}/temperature_fit.txt")
    assert rep["E_kin_uK"] == 0.0
    assert rep["clamped_at_zero"] == 1.0


def test_spectrum_noise_changes_with_seed(tmp_path):
    a = run(tmp_path, "spectrum", "--noise-counts", "200", extra_out="a")
    b = run(tmp_path, "spectrum", "--noise-counts", "200", extra_out="b")
    c = run(tmp_path, "spectrum", "--noise-counts", "200", "--seed", "5",
            extra_out="c")
    read = lambda d: open(f"{d}/spectrum_fluorescence.csv", "rb").read()
    assert read(a) == read(b)
    assert read(a) != read(c)


def test_spectrum_fit_usage_and_missing_file(tmp_path):
    run(tmp_path, "spectrum", "--mode", "fit", code=2)
    run(tmp_path, "spectrum", "--mode", "fit",
        "--reference", str(tmp_path / "no.csv"),
        "--fluorescence", str(tmp_path / "no2.csv"), code=3)


def test_spectrum_fit_rejects_wrong_kind(tmp_path):
    out = run(tmp_path, "g2", "--tau-max-ns", "0")
    run(tmp_path, "spectrum", "--mode", "fit",
        "--reference", f"{out}/g2_deterministic.csv",
        "--fluorescence", f"{out}/g2_deterministic.csv", code=3)


def test_bad_config_exits_3(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("depth_mk = flarp\n")
    rc = main(["trap", "--config", str(bad), "--out", str(tmp_path)])
    assert rc == 3


def test_env_config_fallback(tmp_path, monkeypatch):
    cfgfile = tmp_path / "env.cfg"
    cfgfile.write_text("[trap]\npower_mw = 88\n")
    monkeypatch.setenv("ATOMTRAP_CONFIG", str(cfgfile))
    out = run(tmp_path, "trap", "--quiet")
    rep = fileio.read_fit_report(f"{out}/trap_report.txt")
    assert rep["trap_depth_mK"] == pytest.approx(2 * 0.9572793018693488, rel=1e-9)
    # explicit --config wins over the environment
    other = tmp_path / "other.cfg"
    other.write_text("[trap]\npower_mw = 44\n")
    out2 = run(tmp_path, "trap", "--quiet", "--config", str(other),
               extra_out="explicit")
    rep2 = fileio.read_fit_report(f"{out2}/trap_report.txt")
    assert rep2["trap_depth_mK"] == pytest.approx(0.9572793018693488, rel=1e-9)


def test_quiet_silences_stdout(tmp_path, capsys):
    run(tmp_path, "g2", "--tau-max-ns", "0", "--quiet")
    assert capsys.readouterr().out == ""


def test_verbose_echoes_config(tmp_path, capsys):
    run(tmp_path, "g2", "--tau-max-ns", "0", "--verbose",
        "--override", "depth_mk=0.81")
    text = capsys.readouterr().out
    assert "# config depth_mk" in text
    assert "light-shifted detunings" in text


def test_unknown_flag_exits_2(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["g2", "--badflag"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_default_seed_is_stable():
    assert DEFAULT_SEED == 123456789
