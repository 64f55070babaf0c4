"""Command-line driver: sweep, expose, analyze, reproduce-figures.

Configuration is a flat key=value text file with section prefixes
(device., traps., source., exposure., analysis.) plus a top-level
`seed`.  Every random quantity in a command derives from that master
seed: component RNGs are seeded with the first 8 bytes (big-endian) of
sha256("<seed>:<tag>"), with tags "ensemble", "exposure" and "sweep".
Rerunning a command with the same config and seed rewrites byte-identical
files; output files are written atomically (temp file + rename).

Exit codes: 0 success, 2 configuration/usage error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
import tempfile
import typing
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .analyze import analyze_trace, fit_exponential, report_to_text
from .charge import PhotonSource, TrapConfig, build_ensemble
from .simulate import (
    ExposureConfig,
    Trace,
    exposure_to_gate_equivalence,
    read_trace,
    simulate_exposure,
    simulate_gate_sweep,
    trace_to_text,
)
from .transport import (
    GATE_AXIS,
    ConductanceCurve,
    DeviceParams,
    differential_conductance,
    sweep,
    transconductance,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3

DEFAULT_SWEEP_SPAN = 0.3     # V above threshold covered by the default sweep
DEFAULT_SWEEP_POINTS = 601


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    device: DeviceParams
    traps: TrapConfig
    source: PhotonSource
    exposure: ExposureConfig
    window: int = 12
    threshold: float = 4.0
    bin_width: float = 0.0   # 0 = automatic (fitted mean interval / 3)
    seed: int = 1


def default_config() -> RunConfig:
    return RunConfig(DeviceParams(), TrapConfig(), PhotonSource(), ExposureConfig())


def subseed(master: int, tag: str) -> int:
    """Stable per-component seed derived from the master seed."""
    digest = hashlib.sha256(f"{master}:{tag}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


# ---------------------------------------------------------------------------
# config file parsing / serialization
# ---------------------------------------------------------------------------

_SECTIONS = {
    "device": DeviceParams,
    "traps": TrapConfig,
    "source": PhotonSource,
    "exposure": ExposureConfig,
}

# exposure.seed is derived from the master seed at run time, never configured
_HIDDEN = {("exposure", "seed")}

_ANALYSIS_KEYS = {"window": int, "threshold": float, "bin_width": float}


def _coerce(raw: str, typ):
    if typ is bool:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"expected a boolean, got {raw!r}")
    try:
        return typ(raw)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {raw!r} as {typ.__name__}") from exc


def parse_config(text: str) -> RunConfig:
    section_values: dict[str, dict] = {name: {} for name in _SECTIONS}
    analysis: dict = {}
    seed = 1
    hints = {name: typing.get_type_hints(cls) for name, cls in _SECTIONS.items()}
    known = {name: {f.name for f in fields(cls)} for name, cls in _SECTIONS.items()}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key == "seed":
            seed = _coerce(value, int)
            continue
        prefix, _, name = key.partition(".")
        if prefix == "analysis":
            if name not in _ANALYSIS_KEYS:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            analysis[name] = _coerce(value, _ANALYSIS_KEYS[name])
            continue
        if prefix not in _SECTIONS or name not in known[prefix]:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if (prefix, name) in _HIDDEN:
            raise ConfigError(f"line {lineno}: {key!r} is derived from the master seed")
        section_values[prefix][name] = _coerce(value, hints[prefix][name])

    try:
        built = {name: cls(**section_values[name]) for name, cls in _SECTIONS.items()}
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(device=built["device"], traps=built["traps"],
                     source=built["source"], exposure=built["exposure"],
                     seed=seed, **analysis)


def serialize_config(cfg: RunConfig) -> str:
    lines = [f"seed={cfg.seed}",
             f"analysis.window={cfg.window}",
             f"analysis.threshold={_fmt(cfg.threshold)}",
             f"analysis.bin_width={_fmt(cfg.bin_width)}"]
    for name, cls in _SECTIONS.items():
        obj = getattr(cfg, name)
        for f in fields(cls):
            if (name, f.name) in _HIDDEN:
                continue
            lines.append(f"{name}.{f.name}={_fmt(getattr(obj, f.name))}")
    return "\n".join(lines) + "\n"


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config(text)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _curve_text(curve: ConductanceCurve, value_label: str, header: dict) -> str:
    lines = ["# qpcsim curve v1", f"# axis={curve.axis_kind}"]
    lines += [f"# {k}={_fmt(v)}" for k, v in header.items()]
    axis_label = "gate_voltage_V" if curve.axis_kind == "gate-voltage" else "time_s"
    lines.append(f"{axis_label},{value_label}")
    lines += [f"{_fmt(float(a))},{_fmt(float(g))}"
              for a, g in zip(curve.axis, curve.conductance)]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_sweep(cfg: RunConfig, out_dir: Path, v_start: float | None,
              v_end: float | None, n_points: int,
              noise_sigma: float | None) -> list[Path]:
    device = cfg.device
    if v_start is None:
        v_start = device.threshold_voltage
    if v_end is None:
        v_end = device.threshold_voltage + DEFAULT_SWEEP_SPAN
    sigma = 0.0 if noise_sigma is None else noise_sigma
    trace = simulate_gate_sweep(device, v_start, v_end, n_points, sigma,
                                seed=subseed(cfg.seed, "sweep"))
    trace_path = out_dir / "sweep_trace.csv"
    _atomic_write(trace_path, trace_to_text(trace))
    written = [trace_path]
    if n_points >= 3:  # finite differences need interior points
        dgdv = differential_conductance(
            ConductanceCurve(GATE_AXIS, trace.times, trace.conductance)
        )
        dgdv_path = out_dir / "sweep_differential.csv"
        _atomic_write(dgdv_path, _curve_text(dgdv, "dG_dVg_G0_per_V",
                                             {"n_points": n_points,
                                              "noise_sigma": sigma}))
        written.append(dgdv_path)
    return written


def _run_exposure(cfg: RunConfig, wavelength: float | None,
                  duration: float | None, noise_sigma: float | None) -> Trace:
    source = cfg.source
    if wavelength is not None:
        source = replace(source, wavelength=wavelength)
    exposure = replace(cfg.exposure, seed=subseed(cfg.seed, "exposure"))
    if duration is not None:
        exposure = replace(exposure, duration=duration)
    if noise_sigma is not None:
        exposure = replace(exposure, noise_sigma=noise_sigma)
    ensemble = build_ensemble(cfg.traps, subseed(cfg.seed, "ensemble"))
    return simulate_exposure(cfg.device, ensemble, source, exposure)


def cmd_expose(cfg: RunConfig, out_dir: Path, wavelength: float | None,
               duration: float | None, noise_sigma: float | None) -> list[Path]:
    trace = _run_exposure(cfg, wavelength, duration, noise_sigma)
    path = out_dir / "exposure_trace.csv"
    _atomic_write(path, trace_to_text(trace))
    return [path]


def cmd_analyze(cfg: RunConfig, trace_path, out_dir: Path,
                window: int | None, threshold: float | None,
                bin_width: float | None) -> list[Path]:
    trace = read_trace(trace_path)
    report = analyze_trace(
        trace,
        window=window if window is not None else cfg.window,
        threshold=threshold if threshold is not None else cfg.threshold,
        bin_width=bin_width if bin_width is not None else (cfg.bin_width or None),
    )
    path = out_dir / "analysis_report.txt"
    _atomic_write(path, report_to_text(report))
    return [path]


def cmd_reproduce_figures(cfg: RunConfig, out_dir: Path,
                          noise_sigma: float | None) -> list[Path]:
    """Emit plot-ready data: gate/photo overlay, height-vs-transconductance,
    photon interval histogram with its exponential fit."""
    device = cfg.device
    v0 = device.threshold_voltage
    v1 = v0 + DEFAULT_SWEEP_SPAN

    gate_curve = sweep(v0, v1, DEFAULT_SWEEP_POINTS, device)
    trace = _run_exposure(cfg, None, None, noise_sigma)
    remap = exposure_to_gate_equivalence(trace, device)

    overlay = ["# qpcsim figure: gate-driven vs photo-driven conductance",
               "series,gate_voltage_V,conductance_G0"]
    overlay += [f"gate_sweep,{_fmt(float(v))},{_fmt(float(g))}"
                for v, g in zip(gate_curve.axis, gate_curve.conductance)]
    overlay += [f"photo_remap,{_fmt(float(v))},{_fmt(float(g))}"
                for v, g in zip(remap.axis, remap.conductance)]
    overlay_path = out_dir / "overlay_gate_photo.csv"
    _atomic_write(overlay_path, "\n".join(overlay) + "\n")

    report = analyze_trace(trace, device=device, window=cfg.window,
                           threshold=cfg.threshold,
                           bin_width=cfg.bin_width or None)
    corr = ["# qpcsim figure: step height vs model transconductance",
            "[transconductance]", "gate_voltage_V,dG_dVg_G0_per_V"]
    dgdv = transconductance(gate_curve.axis, device)
    corr += [f"{_fmt(float(v))},{_fmt(float(g))}"
             for v, g in zip(gate_curve.axis, dgdv)]
    corr += ["[steps]", "time_s,height_G0,transconductance_G0_per_V"]
    corr += [f"{_fmt(s.time)},{_fmt(s.height)},{_fmt(float(g))}"
             for s, g in zip(report.steps, report.transconductances)]
    corr_path = out_dir / "step_heights_vs_transconductance.csv"
    _atomic_write(corr_path, "\n".join(corr) + "\n")

    # interval statistics from the run's event log (model ground truth);
    # the detector's version of the same quantities lives in the report
    hist_lines = ["# qpcsim figure: photon inter-arrival histogram"]
    configured = cfg.source.incident_rate * cfg.source.quantum_efficiency
    if configured > 0:
        hist_lines.append(f"# configured_mean_interval_s={_fmt(1.0 / configured)}")
    events = trace.truth_events or []
    if len(events) >= 3:
        intervals = np.diff([e.time for e in events])
        fit = fit_exponential(intervals)
        width = cfg.bin_width or fit.mean_interval / 3.0
        edges = np.floor(intervals / width).astype(int)
        counts = np.bincount(edges)
        hist_lines += [f"# fit_mean_interval_s={_fmt(fit.mean_interval)}",
                       f"# fit_rate_per_s={_fmt(fit.rate)}",
                       f"# ks_statistic={_fmt(fit.ks_statistic)}",
                       "bin_start_s,count"]
        hist_lines += [f"{_fmt(float(i * width))},{int(c)}"
                       for i, c in enumerate(counts)]
    else:
        hist_lines += ["bin_start_s,count"]
    hist_path = out_dir / "photon_interval_histogram.csv"
    _atomic_write(hist_path, "\n".join(hist_lines) + "\n")
    return [overlay_path, corr_path, hist_path]


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qpcsim",
        description="Point-contact single-photon detector: simulate and analyze "
                    "conductance traces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="key=value config file")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")

    p = sub.add_parser("sweep", help="gate-voltage sweep of the channel conductance")
    common(p)
    p.add_argument("--v-start", type=float)
    p.add_argument("--v-end", type=float)
    p.add_argument("--n-points", type=int, default=DEFAULT_SWEEP_POINTS)
    p.add_argument("--noise", type=float, help="additive conductance noise sigma")

    p = sub.add_parser("expose", help="fixed-bias photon exposure run")
    common(p)
    p.add_argument("--wavelength", type=float, help="nm")
    p.add_argument("--duration", type=float, help="seconds of illumination")
    p.add_argument("--noise", type=float, help="conductance noise sigma")

    p = sub.add_parser("analyze", help="detect steps and fit statistics in a trace")
    common(p)
    p.add_argument("trace", type=Path, help="trace file produced by expose")
    p.add_argument("--window", type=int, help="detector window, samples")
    p.add_argument("--threshold", type=float, help="detection threshold, noise SEs")
    p.add_argument("--bin-width", type=float, help="interval histogram bin, seconds")

    p = sub.add_parser("reproduce-figures",
                       help="emit plot-ready overlay/correlation/histogram data")
    common(p)
    p.add_argument("--noise", type=float, help="conductance noise sigma")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else default_config()
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        out_dir = args.out

        if args.command == "sweep":
            written = cmd_sweep(cfg, out_dir, args.v_start, args.v_end,
                                args.n_points, args.noise)
        elif args.command == "expose":
            written = cmd_expose(cfg, out_dir, args.wavelength, args.duration,
                                 args.noise)
        elif args.command == "analyze":
            written = cmd_analyze(cfg, args.trace, out_dir, args.window,
                                  args.threshold, args.bin_width)
        else:
            written = cmd_reproduce_figures(cfg, out_dir, args.noise)
    except ConfigError as exc:
        print(f"qpcsim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"qpcsim: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"qpcsim: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
