"""Quantized conductance of a split-gate point-contact channel.

The constriction is modeled as a saddle-point potential: each transverse
mode contributes a logistic transmission step centered on its subband
bottom, and the gate voltage shifts all subband bottoms linearly through
the lever arm.  At finite temperature the conductance is the transmission
averaged over the thermal window (-df/dE) around the Fermi energy, which
rounds the plateau edges.  Conductance is expressed in units of 2e^2/h
throughout; one unit is ~1/12906 ohm.

The shoulder below the first plateau is modeled phenomenologically by
splitting the lowest mode into two weighted logistic components offset in
energy; no microscopic spin-interaction physics is attempted.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

# Boltzmann constant in meV/K; k_B * 4.2 K = 0.362 meV.
KB_MEV_PER_K = 0.08617333262

# 2e^2/h in siemens (= 1/12906.4 ohm).
CONDUCTANCE_QUANTUM_SIEMENS = 7.748091729e-5

# Calibration: at the threshold voltage the lowest subband bottom sits this
# far (meV) above the Fermi energy, so the channel is pinched off
# (G <= 0.02) right at threshold and opens just above it.
PINCH_MARGIN_MEV = 1.45

# Gauss-Legendre nodes across the thermal window.  160 nodes resolve the
# logistic transmission scale (tunnel_width / 2pi ~ 0.08 meV) well enough
# that doubling the order changes G by < 1e-10.
QUAD_ORDER = 160

# Thermal window half-width in units of k_B*T.
THERMAL_WINDOW_KT = 10.0

GATE_AXIS = "gate-voltage"
TIME_AXIS = "exposure-time"


@dataclass(frozen=True)
class DeviceParams:
    """Transport constants of the point-contact channel.

    Energies are in meV, voltages in volts.  The defaults are calibrated so
    that both the 1.0 and 2.0 plateaus fit within 0.2 V of gate above
    threshold, with thermal rounding at 4.2 K visible but small.
    """

    fermi_energy: float = 1.8        # meV
    temperature: float = 4.2         # K
    mode_spacing: float = 8.0        # meV, transverse subband spacing
    tunnel_width: float = 0.5        # meV, saddle energy scale (step sharpness)
    lever_arm: float = 64.0          # meV of subband shift per volt of gate
    threshold_voltage: float = -1.5  # V, channel-opening threshold
    num_modes: int = 5               # subbands in the conductance sum
    anomaly_enabled: bool = True
    anomaly_weight: float = 0.7      # weight of the early sub-step of mode 0
    anomaly_split: float = 2.4       # meV between the two mode-0 components
    source_drain_bias: float = 0.5   # mV; recorded only, transport is linear response

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if self.mode_spacing <= 0:
            raise ValueError("mode_spacing must be > 0")
        if self.tunnel_width <= 0:
            raise ValueError("tunnel_width must be > 0")
        if self.num_modes < 1:
            raise ValueError("num_modes must be >= 1")
        if self.anomaly_enabled and not 0.0 < self.anomaly_weight < 1.0:
            raise ValueError("anomaly_weight must be in (0, 1)")

    @property
    def thermal_energy(self) -> float:
        """k_B * T in meV."""
        return KB_MEV_PER_K * self.temperature

    @property
    def gate_offset_voltage(self) -> float:
        """Gate voltage where the bare mode ladder is referenced.

        Chosen so that the first subband bottom sits PINCH_MARGIN_MEV above
        the Fermi energy exactly at threshold_voltage.
        """
        return self.threshold_voltage + (
            self.fermi_energy + PINCH_MARGIN_MEV - 0.5 * self.mode_spacing
        ) / self.lever_arm

    def subband_bottom(self, mode_index: int, gate_voltage) -> np.ndarray | float:
        """Energy (meV) of the bottom of subband `mode_index` at a gate voltage."""
        v = np.asarray(gate_voltage, dtype=float)
        return self.mode_spacing * (mode_index + 0.5) - self.lever_arm * (
            v - self.gate_offset_voltage
        )


@dataclass(eq=False)
class ConductanceCurve:
    """Ordered (axis value, conductance) samples; conductance in 2e^2/h."""

    axis_kind: str                 # GATE_AXIS or TIME_AXIS
    axis: np.ndarray               # strictly increasing
    conductance: np.ndarray

    def __post_init__(self):
        self.axis = np.asarray(self.axis, dtype=float)
        self.conductance = np.asarray(self.conductance, dtype=float)
        if self.axis.shape != self.conductance.shape:
            raise ValueError("axis and conductance must have the same length")
        if self.axis.size > 1 and not np.all(np.diff(self.axis) > 0):
            raise ValueError("axis values must be strictly increasing")

    def __len__(self) -> int:
        return self.axis.size


@lru_cache(maxsize=8)
def _gauss_legendre(order: int):
    return np.polynomial.legendre.leggauss(order)


def _thermal_kernel(params: DeviceParams, quad_order: int):
    """Quadrature energies and normalized (-df/dE) weights over E_F +- 10 kT."""
    nodes, weights = _gauss_legendre(quad_order)
    kt = params.thermal_energy
    energies = params.fermi_energy + THERMAL_WINDOW_KT * kt * nodes
    x = (energies - params.fermi_energy) / kt
    kernel = weights / (4.0 * np.cosh(0.5 * x) ** 2)
    return energies, kernel / kernel.sum()


def _logistic_transmission(energy, subband_bottom, tunnel_width):
    z = -2.0 * np.pi * (np.asarray(energy, dtype=float) - subband_bottom) / tunnel_width
    return 1.0 / (1.0 + np.exp(np.clip(z, -700.0, 700.0)))


def mode_transmission(energy, mode_index: int, params: DeviceParams,
                      gate_voltage) -> np.ndarray | float:
    """Transmission probability of one mode at the given energy (meV).

    Logistic in energy with scale tunnel_width/2pi; exactly 1/2 at the
    subband bottom, saturating at 0 and 1.
    """
    if not 0 <= mode_index < params.num_modes:
        raise ValueError(
            f"mode_index {mode_index} out of range [0, {params.num_modes})"
        )
    eps = params.subband_bottom(mode_index, gate_voltage)
    t = _logistic_transmission(energy, eps, params.tunnel_width)
    if np.isscalar(energy) and np.ndim(t) == 0:
        return float(t)
    return t


def conductance(effective_gate_voltage, params: DeviceParams,
                quad_order: int = QUAD_ORDER) -> np.ndarray | float:
    """Linear-response conductance (units of 2e^2/h) at a gate voltage.

    Sum over modes of the transmission averaged against the normalized
    thermal kernel (-df/dE) over E_F +- 10 k_B T.  When the shoulder model
    is enabled, mode 0 is the weighted mixture of two logistic components
    offset by anomaly_split.  Accepts scalars or arrays.
    """
    scalar_in = np.isscalar(effective_gate_voltage)
    v = np.atleast_1d(np.asarray(effective_gate_voltage, dtype=float))
    energies, kernel = _thermal_kernel(params, quad_order)

    total = np.zeros(v.shape)
    for n in range(params.num_modes):
        eps = np.asarray(params.subband_bottom(n, v))[..., None]
        t = _logistic_transmission(energies[None, :], eps, params.tunnel_width)
        if n == 0 and params.anomaly_enabled:
            t_late = _logistic_transmission(
                energies[None, :], eps + params.anomaly_split, params.tunnel_width
            )
            t = params.anomaly_weight * t + (1.0 - params.anomaly_weight) * t_late
        total += t @ kernel
    return float(total[0]) if scalar_in else total


def transconductance(effective_gate_voltage, params: DeviceParams,
                     quad_order: int = QUAD_ORDER) -> np.ndarray | float:
    """Analytic dG/dV_g (units (2e^2/h)/V) of the model conductance.

    Differentiates the logistic transmission under the same quadrature used
    by `conductance`, so it is consistent with finite differences of G to
    the quadrature accuracy.
    """
    scalar_in = np.isscalar(effective_gate_voltage)
    v = np.atleast_1d(np.asarray(effective_gate_voltage, dtype=float))
    energies, kernel = _thermal_kernel(params, quad_order)
    slope = 2.0 * np.pi / params.tunnel_width * params.lever_arm

    total = np.zeros(v.shape)
    for n in range(params.num_modes):
        eps = np.asarray(params.subband_bottom(n, v))[..., None]
        t = _logistic_transmission(energies[None, :], eps, params.tunnel_width)
        dt = slope * t * (1.0 - t)
        if n == 0 and params.anomaly_enabled:
            t_late = _logistic_transmission(
                energies[None, :], eps + params.anomaly_split, params.tunnel_width
            )
            dt = params.anomaly_weight * dt + (1.0 - params.anomaly_weight) * (
                slope * t_late * (1.0 - t_late)
            )
        total += dt @ kernel
    return float(total[0]) if scalar_in else total


def sweep(v_start: float, v_end: float, n_points: int,
          params: DeviceParams) -> ConductanceCurve:
    """Conductance sampled on a uniform gate-voltage grid."""
    if not v_start < v_end:
        raise ValueError("v_start must be < v_end")
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    v = np.linspace(v_start, v_end, n_points)
    g = conductance(v, params)
    return ConductanceCurve(GATE_AXIS, v, g)


def differential_conductance(curve: ConductanceCurve) -> ConductanceCurve:
    """dG/dV_g by central finite differences (one-sided at the ends)."""
    if curve.axis_kind != GATE_AXIS:
        raise ValueError("differential conductance requires a gate-voltage curve")
    if len(curve) < 3:
        raise ValueError("need at least 3 points")
    v, g = curve.axis, curve.conductance
    dg = np.empty_like(g)
    dg[1:-1] = (g[2:] - g[:-2]) / (v[2:] - v[:-2])
    dg[0] = (g[1] - g[0]) / (v[1] - v[0])
    dg[-1] = (g[-1] - g[-2]) / (v[-1] - v[-2])
    return ConductanceCurve(GATE_AXIS, v.copy(), dg)
