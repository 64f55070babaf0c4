"""Monte Carlo experiments: photon exposures and noisy gate sweeps.

An exposure run is event-driven: incident photons arrive as a homogeneous
Poisson process, are thinned by the quantum efficiency, and each surviving
photon captures a hole at a trap (layer permitting).  The source/drain
conductance is sampled on a uniform clock; an event landing between two
ticks appears at the next sample, i.e. the conductance response is a step
function.  The sampled signal is the transport-model conductance at
(gate bias + accumulated trap gate shift) plus white Gaussian noise.

Every run owns its RNG and its ensemble; identical seeds reproduce a run
bit-exactly.  Trace files round-trip exactly (floats are written with
shortest round-trip repr).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .charge import (
    LAYER_NONE,
    PhotonSource,
    TrapEnsemble,
    absorption_target,
    capture_photon,
    effective_gate_shift,
)
from .transport import GATE_AXIS, TIME_AXIS, ConductanceCurve, DeviceParams, conductance


@dataclass(frozen=True)
class ExposureConfig:
    duration: float = 5400.0        # s of illumination (t = 0 .. duration)
    sample_interval: float = 0.5    # s between conductance samples
    dark_lead: float = 60.0         # s of dark sampling before t = 0
    gate_bias: float = -1.5         # V, fixed gate during the exposure
    noise_sigma: float = 0.005      # conductance noise, units of 2e^2/h
    seed: int = 1
    barrier_includes_buffer: bool = False  # also fill buffer traps at short wavelength

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be > 0")
        if self.sample_interval <= 0:
            raise ValueError("sample_interval must be > 0")
        if self.dark_lead < 0:
            raise ValueError("dark_lead must be >= 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


@dataclass(frozen=True)
class TruthEvent:
    """One successful capture: when, how strongly it gates the channel."""

    time: float          # s
    coupling: float      # V
    gate_shift_after: float  # V, cumulative shift including this event


@dataclass(eq=False)
class Trace:
    """Sampled conductance plus the ground-truth event log of the run."""

    axis_kind: str                     # TIME_AXIS or GATE_AXIS
    times: np.ndarray                  # sample positions (s, or V for sweeps)
    conductance: np.ndarray            # units of 2e^2/h
    truth_events: list[TruthEvent] | None  # None for runs without an event log
    config: dict = field(default_factory=dict)
    photons_incident: int = 0
    photons_absorbed: int = 0

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.conductance = np.asarray(self.conductance, dtype=float)
        if self.times.shape != self.conductance.shape:
            raise ValueError("times and conductance must have the same length")
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("sample positions must be strictly increasing")

    @property
    def photons_captured(self) -> int:
        return 0 if self.truth_events is None else len(self.truth_events)


def poisson_event_times(rate: float, duration: float,
                        rng: np.random.Generator) -> np.ndarray:
    """Arrival times of a homogeneous Poisson process on (0, duration]."""
    if rate < 0 or duration < 0:
        raise ValueError("rate and duration must be >= 0")
    if rate == 0 or duration == 0:
        return np.empty(0)
    times = []
    t = 0.0
    # draw gaps in blocks; tail blocks are rarely needed
    block = max(16, int(rate * duration * 1.25) + 16)
    while True:
        gaps = rng.exponential(1.0 / rate, block)
        arr = t + np.cumsum(gaps)
        inside = arr[arr <= duration]
        times.append(inside)
        if inside.size < arr.size:
            return np.concatenate(times)
        t = arr[-1]
        block = max(16, block // 4)


def _sample_times(config: ExposureConfig) -> np.ndarray:
    n = int(math.floor((config.dark_lead + config.duration)
                       / config.sample_interval + 1e-9)) + 1
    return -config.dark_lead + np.arange(n) * config.sample_interval


def simulate_exposure(device: DeviceParams, ensemble: TrapEnsemble,
                      source: PhotonSource, config: ExposureConfig) -> Trace:
    """Fixed-bias photon exposure; returns the sampled trace and event log.

    A fully saturated (or absorbing-nowhere) configuration yields a valid
    flat trace with an empty event log.
    """
    rng = np.random.default_rng(config.seed)
    layer = absorption_target(source.wavelength)

    incident = poisson_event_times(source.incident_rate, config.duration, rng)
    keep = rng.uniform(size=incident.size) < source.quantum_efficiency
    absorbed = incident[keep] if layer != LAYER_NONE else np.empty(0)

    # charge trapped in earlier runs persists: start from the current shift
    initial_shift = effective_gate_shift(ensemble)
    events: list[TruthEvent] = []
    shift = initial_shift
    for t in absorbed:
        trap = capture_photon(
            ensemble, layer, rng,
            include_buffer_with_barrier=config.barrier_includes_buffer,
        )
        if trap is None:
            continue  # saturated: photon changes nothing
        shift += trap.coupling
        events.append(TruthEvent(float(t), trap.coupling, shift))

    times = _sample_times(config)
    event_times = np.array([e.time for e in events])
    shift_after = np.array([e.gate_shift_after for e in events])
    idx = np.searchsorted(event_times, times, side="right")

    # piecewise-constant signal: evaluate G once per distinct shift level
    levels = np.concatenate([[initial_shift], shift_after])
    g_levels = np.asarray(conductance(config.gate_bias + levels, device))
    baseline = g_levels[idx]

    samples = baseline
    if config.noise_sigma > 0:
        samples = baseline + rng.normal(0.0, config.noise_sigma, times.size)

    cfg = {
        "kind": "exposure",
        "gate_bias": config.gate_bias,
        "initial_gate_shift": initial_shift,
        "duration": config.duration,
        "sample_interval": config.sample_interval,
        "dark_lead": config.dark_lead,
        "noise_sigma": config.noise_sigma,
        "seed": config.seed,
        "barrier_includes_buffer": config.barrier_includes_buffer,
        "wavelength": source.wavelength,
        "incident_rate": source.incident_rate,
        "quantum_efficiency": source.quantum_efficiency,
    }
    cfg.update(_device_snapshot(device))
    return Trace(TIME_AXIS, times, samples, events, cfg,
                 photons_incident=int(incident.size),
                 photons_absorbed=int(absorbed.size))


def simulate_gate_sweep(device: DeviceParams, v_start: float, v_end: float,
                        n_points: int, noise_sigma: float = 0.0,
                        seed: int = 0) -> Trace:
    """Gate sweep with additive Gaussian noise; noiseless equals the model curve."""
    if not v_start < v_end:
        raise ValueError("v_start must be < v_end")
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    v = np.linspace(v_start, v_end, n_points)
    g = np.asarray(conductance(v, device))
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        g = g + rng.normal(0.0, noise_sigma, v.size)
    cfg = {
        "kind": "sweep",
        "v_start": v_start,
        "v_end": v_end,
        "n_points": n_points,
        "noise_sigma": noise_sigma,
        "seed": seed,
    }
    cfg.update(_device_snapshot(device))
    return Trace(GATE_AXIS, v, g, None, cfg)


def exposure_to_gate_equivalence(trace: Trace,
                                 device: DeviceParams) -> ConductanceCurve:
    """Re-plot an exposure against the gate voltage its trapped charge mimics.

    Each sample is placed at gate_bias + cumulative gate shift; samples
    sharing a shift level are averaged into one point, yielding a curve
    directly comparable with a gate-only sweep.
    """
    if trace.truth_events is None:
        raise ValueError("trace carries no truth events; cannot remap")
    if trace.axis_kind != TIME_AXIS:
        raise ValueError("only time-axis exposure traces can be remapped")
    gate_bias = float(trace.config.get("gate_bias", 0.0))
    initial_shift = float(trace.config.get("initial_gate_shift", 0.0))

    event_times = np.array([e.time for e in trace.truth_events])
    shift_after = np.array([e.gate_shift_after for e in trace.truth_events])
    idx = np.searchsorted(event_times, trace.times, side="right")

    levels = np.concatenate([[initial_shift], shift_after])
    volts = gate_bias + levels
    sums = np.bincount(idx, weights=trace.conductance, minlength=levels.size)
    counts = np.bincount(idx, minlength=levels.size)
    visited = counts > 0
    g = sums[visited] / counts[visited]
    return ConductanceCurve(GATE_AXIS, volts[visited], g)


def add_telegraph_signal(trace: Trace, amplitude: float = 0.02,
                         switch_rate: float = 0.05, seed: int = 0) -> Trace:
    """Overlay a two-level fluctuator (random telegraph signal) on a trace.

    Stress-test contaminant for the step detector: unlike photon steps the
    fluctuator moves in both directions.  Off by default everywhere.
    """
    if amplitude < 0 or switch_rate < 0:
        raise ValueError("amplitude and switch_rate must be >= 0")
    rng = np.random.default_rng(seed)
    t = trace.times
    span = float(t[-1] - t[0]) if t.size > 1 else 0.0
    switches = poisson_event_times(switch_rate, span, rng)
    state = np.zeros(t.size)
    if t.size:
        flips = np.searchsorted(t[0] + switches, t, side="right")
        state = np.where(flips % 2 == 0, 0.0, 1.0)
    contaminated = trace.conductance + amplitude * state
    cfg = dict(trace.config)
    cfg["telegraph_amplitude"] = amplitude
    cfg["telegraph_switch_rate"] = switch_rate
    events = None if trace.truth_events is None else list(trace.truth_events)
    return Trace(trace.axis_kind, t.copy(), contaminated, events, cfg,
                 trace.photons_incident, trace.photons_absorbed)


def _device_snapshot(device: DeviceParams) -> dict:
    return {
        "device_fermi_energy": device.fermi_energy,
        "device_temperature": device.temperature,
        "device_mode_spacing": device.mode_spacing,
        "device_tunnel_width": device.tunnel_width,
        "device_lever_arm": device.lever_arm,
        "device_threshold_voltage": device.threshold_voltage,
        "device_num_modes": device.num_modes,
        "device_anomaly_enabled": device.anomaly_enabled,
        "device_anomaly_weight": device.anomaly_weight,
        "device_anomaly_split": device.anomaly_split,
        "device_source_drain_bias": device.source_drain_bias,
    }


def device_from_config(config: dict) -> DeviceParams:
    """Rebuild DeviceParams from a trace-header snapshot."""
    return DeviceParams(
        fermi_energy=float(config["device_fermi_energy"]),
        temperature=float(config["device_temperature"]),
        mode_spacing=float(config["device_mode_spacing"]),
        tunnel_width=float(config["device_tunnel_width"]),
        lever_arm=float(config["device_lever_arm"]),
        threshold_voltage=float(config["device_threshold_voltage"]),
        num_modes=int(config["device_num_modes"]),
        anomaly_enabled=bool(config["device_anomaly_enabled"]),
        anomaly_weight=float(config["device_anomaly_weight"]),
        anomaly_split=float(config["device_anomaly_split"]),
        source_drain_bias=float(config["device_source_drain_bias"]),
    )


# ---------------------------------------------------------------------------
# Trace file format: '#'-prefixed key=value header, a column-labelled sample
# table, then (for runs with an event log) an 'events' table.  Floats use
# repr, so read(write(trace)) is bit-exact.
# ---------------------------------------------------------------------------

_AXIS_COLUMN = {TIME_AXIS: "time_s", GATE_AXIS: "gate_voltage_V"}


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(text: str):
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def trace_to_text(trace: Trace) -> str:
    lines = ["# qpcsim trace v1", f"# axis={trace.axis_kind}"]
    for key in sorted(trace.config):
        lines.append(f"# {key}={_fmt(trace.config[key])}")
    lines.append(f"# photons_incident={trace.photons_incident}")
    lines.append(f"# photons_absorbed={trace.photons_absorbed}")
    lines.append(f"{_AXIS_COLUMN[trace.axis_kind]},conductance_G0")
    for t, g in zip(trace.times, trace.conductance):
        lines.append(f"{_fmt(float(t))},{_fmt(float(g))}")
    if trace.truth_events is not None:
        lines.append("events")
        lines.append("time_s,coupling_V")
        for e in trace.truth_events:
            lines.append(f"{_fmt(e.time)},{_fmt(e.coupling)}")
    return "\n".join(lines) + "\n"


def trace_from_text(text: str) -> Trace:
    axis_kind = TIME_AXIS
    config: dict = {}
    incident = absorbed = 0
    times: list[float] = []
    values: list[float] = []
    events: list[TruthEvent] | None = None
    section = "samples"
    shift: float | None = None  # starts at the header's initial_gate_shift

    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" not in body:
                continue
            key, _, val = body.partition("=")
            key = key.strip()
            parsed = _parse_value(val.strip())
            if key == "axis":
                axis_kind = str(parsed)
            elif key == "photons_incident":
                incident = int(parsed)
            elif key == "photons_absorbed":
                absorbed = int(parsed)
            else:
                config[key] = parsed
            continue
        if line == "events":
            section = "events"
            events = []
            continue
        if line in ("time_s,conductance_G0", "gate_voltage_V,conductance_G0",
                    "time_s,coupling_V"):
            continue
        a, _, b = line.partition(",")
        if section == "samples":
            times.append(float(a))
            values.append(float(b))
        else:
            coupling = float(b)
            if shift is None:
                shift = float(config.get("initial_gate_shift", 0.0))
            shift += coupling
            events.append(TruthEvent(float(a), coupling, shift))

    return Trace(axis_kind, np.array(times), np.array(values), events, config,
                 photons_incident=incident, photons_absorbed=absorbed)


def write_trace(trace: Trace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(trace_to_text(trace))


def read_trace(path) -> Trace:
    with open(path, "r", encoding="utf-8") as fh:
        return trace_from_text(fh.read())
