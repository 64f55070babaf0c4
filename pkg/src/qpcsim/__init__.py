"""Simulator and analysis toolkit for a point-contact single-photon detector.

The package composes four layers:

* `transport` -- quantized channel conductance vs gate voltage (saddle-point
  transmission, thermal broadening, phenomenological 0.7-like shoulder);
* `charge`    -- the trap ensemble that converts captured photo-holes into
  persistent effective gate shifts;
* `simulate`  -- event-driven exposure and sweep experiments producing
  reproducible traces with ground-truth event logs;
* `analyze`   -- step detection, exponential interval statistics, and the
  step-height vs transconductance correlation.

`cli` wires them into the `qpcsim` command.
"""

from .analyze import (
    AnalysisReport,
    IntervalFit,
    StepEvent,
    analyze_trace,
    correlate_heights,
    detect_steps,
    estimate_noise_sigma,
    fit_exponential,
    interval_histogram,
    saturation_summary,
)
from .charge import (
    PhotonSource,
    Trap,
    TrapConfig,
    TrapEnsemble,
    absorption_target,
    build_ensemble,
    capture_photon,
    effective_gate_shift,
)
from .simulate import (
    ExposureConfig,
    Trace,
    TruthEvent,
    add_telegraph_signal,
    exposure_to_gate_equivalence,
    poisson_event_times,
    read_trace,
    simulate_exposure,
    simulate_gate_sweep,
    write_trace,
)
from .transport import (
    CONDUCTANCE_QUANTUM_SIEMENS,
    ConductanceCurve,
    DeviceParams,
    conductance,
    differential_conductance,
    mode_transmission,
    sweep,
    transconductance,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisReport", "IntervalFit", "StepEvent", "analyze_trace",
    "correlate_heights", "detect_steps", "estimate_noise_sigma",
    "fit_exponential", "interval_histogram", "saturation_summary",
    "PhotonSource", "Trap", "TrapConfig", "TrapEnsemble", "absorption_target",
    "build_ensemble", "capture_photon", "effective_gate_shift",
    "ExposureConfig", "Trace", "TruthEvent", "add_telegraph_signal",
    "exposure_to_gate_equivalence", "poisson_event_times", "read_trace",
    "simulate_exposure", "simulate_gate_sweep", "write_trace",
    "CONDUCTANCE_QUANTUM_SIEMENS", "ConductanceCurve", "DeviceParams",
    "conductance", "differential_conductance", "mode_transmission", "sweep",
    "transconductance",
]
