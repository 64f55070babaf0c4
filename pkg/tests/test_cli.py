import numpy as np
import pytest

from qpcsim.charge import TrapConfig
from qpcsim.cli import (
    ConfigError,
    default_config,
    main,
    parse_config,
    serialize_config,
    subseed,
)
from qpcsim.simulate import read_trace
from qpcsim.transport import DeviceParams, conductance


# ---------------------------------------------------------------------------
# config file handling
# ---------------------------------------------------------------------------

def test_config_roundtrip_identity():
    cfg = default_config()
    assert parse_config(serialize_config(cfg)) == cfg


def test_config_roundtrip_with_custom_values():
    text = "\n".join([
        "seed=42",
        "device.temperature=1.7",
        "device.lever_arm=80.0",
        "traps.buffer_trap_count=500",
        "source.wavelength=650.0",
        "exposure.duration=900.0",
        "exposure.barrier_includes_buffer=true",
        "analysis.window=8",
        "analysis.threshold=5.0",
    ])
    cfg = parse_config(text)
    assert cfg.seed == 42
    assert cfg.device.temperature == 1.7
    assert cfg.traps.buffer_trap_count == 500
    assert cfg.exposure.barrier_includes_buffer is True
    assert cfg.window == 8
    assert parse_config(serialize_config(cfg)) == cfg


def test_config_rejects_unknown_and_malformed_keys():
    with pytest.raises(ConfigError):
        parse_config("device.unknown_knob=3")
    with pytest.raises(ConfigError):
        parse_config("just a line")
    with pytest.raises(ConfigError):
        parse_config("device.temperature=warm")
    with pytest.raises(ConfigError):
        parse_config("exposure.seed=5")  # derived from the master seed
    with pytest.raises(ConfigError):
        parse_config("device.temperature=-4.0")  # fails validation


def test_subseed_is_stable_and_tag_dependent():
    assert subseed(1, "ensemble") == subseed(1, "ensemble")
    assert subseed(1, "ensemble") != subseed(1, "exposure")
    assert subseed(1, "ensemble") != subseed(2, "ensemble")


# ---------------------------------------------------------------------------
# sweep command
# ---------------------------------------------------------------------------

def test_sweep_default_contains_first_plateau(tmp_path):
    assert main(["sweep", "--out", str(tmp_path)]) == 0
    trace = read_trace(tmp_path / "sweep_trace.csv")
    assert np.abs(trace.conductance - 1.0).min() <= 0.02
    assert (tmp_path / "sweep_differential.csv").exists()


def test_sweep_two_points(tmp_path):
    assert main(["sweep", "--out", str(tmp_path), "--n-points", "2"]) == 0
    trace = read_trace(tmp_path / "sweep_trace.csv")
    assert len(trace.times) == 2


def test_sweep_rerun_is_byte_identical(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["sweep", "--out", str(out1), "--noise", "0.004"]) == 0
    assert main(["sweep", "--out", str(out2), "--noise", "0.004"]) == 0
    assert (out1 / "sweep_trace.csv").read_bytes() == \
           (out2 / "sweep_trace.csv").read_bytes()
    assert (out1 / "sweep_differential.csv").read_bytes() == \
           (out2 / "sweep_differential.csv").read_bytes()


def test_sweep_invalid_range_exits_2(tmp_path, capsys):
    code = main(["sweep", "--out", str(tmp_path),
                 "--v-start", "-1.3", "--v-end", "-1.5"])
    assert code == 2
    assert "v_start" in capsys.readouterr().err


def test_sweep_unwritable_path_exits_3(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("a file, not a directory")
    code = main(["sweep", "--out", str(blocker / "sub")])
    assert code == 3


# ---------------------------------------------------------------------------
# expose command
# ---------------------------------------------------------------------------

def test_expose_at_700nm_fills_only_buffer_traps(tmp_path):
    assert main(["expose", "--out", str(tmp_path), "--wavelength", "700",
                 "--duration", "3000"]) == 0
    trace = read_trace(tmp_path / "exposure_trace.csv")
    assert trace.truth_events, "buffer captures expected at 700 nm"
    scale = TrapConfig().buffer_coupling_scale
    assert all(e.coupling <= scale for e in trace.truth_events)


def test_expose_below_gap_creates_no_events(tmp_path):
    assert main(["expose", "--out", str(tmp_path), "--wavelength", "1000"]) == 0
    trace = read_trace(tmp_path / "exposure_trace.csv")
    assert trace.truth_events == []
    assert trace.photons_absorbed == 0
    assert np.ptp(trace.conductance) < 0.05  # noise only


def test_expose_tiny_duration_still_valid(tmp_path):
    assert main(["expose", "--out", str(tmp_path), "--duration", "0.001"]) == 0
    trace = read_trace(tmp_path / "exposure_trace.csv")
    assert trace.photons_captured == 0
    assert trace.times.size >= 1


def test_expose_and_analyze_rerun_byte_identical(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        assert main(["expose", "--out", str(out), "--duration", "1200"]) == 0
        assert main(["analyze", str(out / "exposure_trace.csv"),
                     "--out", str(out)]) == 0
    assert (out1 / "exposure_trace.csv").read_bytes() == \
           (out2 / "exposure_trace.csv").read_bytes()
    assert (out1 / "analysis_report.txt").read_bytes() == \
           (out2 / "analysis_report.txt").read_bytes()


def test_expose_seed_changes_trace(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["expose", "--out", str(out1), "--duration", "1200"]) == 0
    assert main(["expose", "--out", str(out2), "--duration", "1200",
                 "--seed", "2"]) == 0
    assert (out1 / "exposure_trace.csv").read_bytes() != \
           (out2 / "exposure_trace.csv").read_bytes()


# ---------------------------------------------------------------------------
# analyze command
# ---------------------------------------------------------------------------

def test_analyze_full_run_writes_report(tmp_path):
    assert main(["expose", "--out", str(tmp_path)]) == 0
    assert main(["analyze", str(tmp_path / "exposure_trace.csv"),
                 "--out", str(tmp_path)]) == 0
    report = (tmp_path / "analysis_report.txt").read_text()
    assert "[steps]" in report and "[saturation]" in report
    saturation_row = report.splitlines()[-1]
    flag, count, _ = saturation_row.split(",")
    assert flag == "true"
    assert int(count) > 0


def test_analyze_dark_trace_reports_zero_steps(tmp_path):
    cfg = tmp_path / "dark.cfg"
    cfg.write_text("source.incident_rate=0.0\nexposure.duration=2000.0\n")
    assert main(["expose", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert main(["analyze", str(tmp_path / "exposure_trace.csv"),
                 "--out", str(tmp_path), "--threshold", "5"]) == 0
    report = (tmp_path / "analysis_report.txt").read_text()
    steps_section = report.split("[steps]")[1].split("[intervals]")[0]
    assert len(steps_section.strip().splitlines()) == 1  # header only


def test_analyze_sweep_file_is_wrong_axis(tmp_path, capsys):
    assert main(["sweep", "--out", str(tmp_path)]) == 0
    code = main(["analyze", str(tmp_path / "sweep_trace.csv"),
                 "--out", str(tmp_path)])
    assert code == 2
    assert "time-axis" in capsys.readouterr().err


def test_analyze_missing_file_exits_3(tmp_path):
    assert main(["analyze", str(tmp_path / "nope.csv"),
                 "--out", str(tmp_path)]) == 3


def test_bad_config_file_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("device.bogus=1\n")
    assert main(["expose", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# reproduce-figures command
# ---------------------------------------------------------------------------

def test_figures_noiseless_overlay_and_fit(tmp_path):
    assert main(["reproduce-figures", "--out", str(tmp_path),
                 "--noise", "0"]) == 0
    overlay = (tmp_path / "overlay_gate_photo.csv").read_text().splitlines()
    assert overlay[1] == "series,gate_voltage_V,conductance_G0"
    device = DeviceParams()
    photo = [(float(v), float(g)) for line in overlay[2:]
             for s, v, g in [line.split(",")] if s == "photo_remap"]
    # one staircase level per sampled shift (captures inside one sample tick
    # can hide a level), plus the dark level
    assert 90 <= len(photo) <= 100
    volts = np.array([p[0] for p in photo])
    values = np.array([p[1] for p in photo])
    assert values[-1] > 1.9  # the remap climbs to the second plateau
    assert np.abs(values - np.asarray(conductance(volts, device))).max() <= 0.05

    corr = (tmp_path / "step_heights_vs_transconductance.csv").read_text()
    assert "[transconductance]" in corr and "[steps]" in corr
    steps_rows = corr.split("[steps]")[1].strip().splitlines()[1:]
    assert len(steps_rows) > 10

    hist = (tmp_path / "photon_interval_histogram.csv").read_text().splitlines()
    header = {line.split("=")[0][2:]: float(line.split("=")[1])
              for line in hist if line.startswith("# ") and "=" in line}
    assert abs(header["fit_mean_interval_s"] - header["configured_mean_interval_s"]) \
        <= 0.10 * header["configured_mean_interval_s"]
    rows = [line for line in hist if line and not line.startswith("#")
            and "," in line and not line.startswith("bin_")]
    assert sum(int(r.split(",")[1]) for r in rows) == 98  # 99 events -> 98 gaps


def test_figures_rerun_byte_identical(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        assert main(["reproduce-figures", "--out", str(out)]) == 0
    for name in ("overlay_gate_photo.csv", "step_heights_vs_transconductance.csv",
                 "photon_interval_histogram.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
