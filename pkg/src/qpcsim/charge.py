"""Trap ensemble and photon-capture bookkeeping.

A trapped photo-hole adds fixed positive charge near the channel, which
acts on the channel exactly like a small positive gate increment.  Hole
capture proceeds either at a charged deep-donor complex (neutralized by
the hole) or at a neutral donor (ionized by it); both raise the net donor
charge by +e, so each trap carries a single per-trap gate-shift coupling
and occupation is one-way within a run.  At cryogenic temperature the
trapped charge does not recombine on experimental time scales, so no
release path is modeled.

Two trap populations exist: ~100 dopant-layer traps with mV-scale
couplings (discrete, countable steps) and a dilute background of buffer
traps far from the channel whose couplings are ~100x smaller, producing
only a smooth conductance drift.  Which population a photon can reach is
set by its wavelength (absorption layer).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Elementary charge, coulombs.
E_CHARGE = 1.602176634e-19

# Wavelength (nm) below which photons are absorbed in the doped barrier
# layer (gap ~1.9 eV) and can reach the dopant traps.
BARRIER_ABSORPTION_EDGE_NM = 650.0

# Wavelength (nm) of the substrate band edge; beyond it nothing absorbs.
SUBSTRATE_ABSORPTION_EDGE_NM = 870.0

DX_CENTER = "dx_center"
NEUTRAL_DONOR = "neutral_donor"
BUFFER_MICRO = "buffer_micro"

LAYER_BARRIER = "algaas"
LAYER_BUFFER = "gaas_buffer"
LAYER_NONE = "none"

_DOPANT_KINDS = (DX_CENTER, NEUTRAL_DONOR)


@dataclass(frozen=True)
class TrapConfig:
    """Trap-population constants.

    The dopant trap count is the carrier count in the active area; with
    the defaults that is 99 traps whose couplings sum to the full 0.2 V
    gate equivalent of the saturated photoresponse.
    """

    carrier_density: float = 3.3e11          # cm^-2
    active_area: float = 3e-10               # cm^2
    channel_capacitance: float = 1e-16       # F
    saturation_gate_shift: float = 0.2       # V, total shift when all dopant traps fill
    coupling_distribution: str = "exponential"   # or "constant"
    buffer_trap_count: int = 2000
    buffer_coupling_scale: float = 1e-5      # V, upper bound of buffer couplings

    def __post_init__(self):
        if self.dopant_trap_count <= 0:
            raise ValueError("dopant trap count must be > 0")
        if self.saturation_gate_shift <= 0:
            raise ValueError("saturation_gate_shift must be > 0")
        if self.coupling_distribution not in ("exponential", "constant"):
            raise ValueError(
                f"unknown coupling_distribution {self.coupling_distribution!r}"
            )
        if self.buffer_trap_count < 0:
            raise ValueError("buffer_trap_count must be >= 0")
        if self.buffer_coupling_scale <= 0:
            raise ValueError("buffer_coupling_scale must be > 0")

    @property
    def dopant_trap_count(self) -> int:
        return int(round(self.carrier_density * self.active_area))

    @property
    def mean_dopant_coupling(self) -> float:
        """Mean per-trap gate shift (V); count * mean = saturation shift."""
        return self.saturation_gate_shift / self.dopant_trap_count

    @property
    def single_charge_voltage(self) -> float:
        """e / C of the channel (V); the natural scale of one trapped charge."""
        return E_CHARGE / self.channel_capacitance


@dataclass(frozen=True)
class PhotonSource:
    wavelength: float = 550.0        # nm
    incident_rate: float = 0.1       # photons/s on the active area
    quantum_efficiency: float = 0.3

    def __post_init__(self):
        if self.wavelength <= 0:
            raise ValueError("wavelength must be > 0")
        if self.incident_rate < 0:
            raise ValueError("incident_rate must be >= 0")
        if not 0.0 <= self.quantum_efficiency <= 1.0:
            raise ValueError("quantum_efficiency must be in [0, 1]")

    @property
    def detected_rate(self) -> float:
        """Rate of detectable absorption events (incident thinned by QE)."""
        return self.incident_rate * self.quantum_efficiency


@dataclass
class Trap:
    kind: str          # DX_CENTER | NEUTRAL_DONOR | BUFFER_MICRO
    coupling: float    # V of effective gate shift when occupied
    occupied: bool = False

    def __post_init__(self):
        if self.coupling <= 0:
            raise ValueError("trap coupling must be > 0")


@dataclass
class TrapEnsemble:
    """All traps of one device instance; occupancy only ever increases."""

    traps: list[Trap]
    rng_seed: int = 0

    @property
    def occupied_count(self) -> int:
        return sum(1 for t in self.traps if t.occupied)

    def unoccupied(self, kinds) -> list[int]:
        return [i for i, t in enumerate(self.traps)
                if not t.occupied and t.kind in kinds]

    def dopant_couplings(self) -> np.ndarray:
        return np.array([t.coupling for t in self.traps if t.kind in _DOPANT_KINDS])


def build_ensemble(config: TrapConfig, seed: int) -> TrapEnsemble:
    """Draw a trap ensemble; deterministic for a fixed seed.

    Dopant couplings come from the configured distribution with mean
    saturation_gate_shift / count; buffer couplings are uniform in
    (0.2, 1.0) x buffer_coupling_scale, so every buffer coupling stays at
    or below the scale.  All traps start unoccupied.
    """
    rng = np.random.default_rng(seed)
    n = config.dopant_trap_count
    mean = config.mean_dopant_coupling
    if config.coupling_distribution == "exponential":
        couplings = rng.exponential(mean, n)
        # exponential draws are > 0 with probability 1, but guard exactly
        couplings = np.maximum(couplings, 1e-300)
    else:
        couplings = np.full(n, mean)
    kinds = rng.choice([DX_CENTER, NEUTRAL_DONOR], size=n)

    traps = [Trap(kind=str(k), coupling=float(c)) for k, c in zip(kinds, couplings)]
    buffer_couplings = config.buffer_coupling_scale * rng.uniform(
        0.2, 1.0, config.buffer_trap_count
    )
    traps.extend(Trap(kind=BUFFER_MICRO, coupling=float(c)) for c in buffer_couplings)
    return TrapEnsemble(traps=traps, rng_seed=seed)


def absorption_target(wavelength: float) -> str:
    """Which layer absorbs a photon of this wavelength (nm).

    Short wavelengths reach the doped barrier layer (dopant traps, discrete
    steps); between the barrier and substrate band edges only the dilute
    buffer traps are reachable (smooth rise); below the substrate gap no
    absorption occurs.
    """
    if wavelength <= 0:
        raise ValueError("wavelength must be > 0")
    if wavelength <= BARRIER_ABSORPTION_EDGE_NM:
        return LAYER_BARRIER
    if wavelength <= SUBSTRATE_ABSORPTION_EDGE_NM:
        return LAYER_BUFFER
    return LAYER_NONE


def capture_photon(ensemble: TrapEnsemble, layer: str, rng: np.random.Generator,
                   include_buffer_with_barrier: bool = False) -> Trap | None:
    """Capture one photo-hole at a uniformly chosen eligible empty trap.

    Returns the newly occupied trap, or None once every eligible trap is
    already filled (saturation of the photoresponse; not an error).
    """
    if layer == LAYER_BARRIER:
        kinds = _DOPANT_KINDS + ((BUFFER_MICRO,) if include_buffer_with_barrier else ())
    elif layer == LAYER_BUFFER:
        kinds = (BUFFER_MICRO,)
    else:
        raise ValueError(f"no capture possible in layer {layer!r}")
    candidates = ensemble.unoccupied(kinds)
    if not candidates:
        return None
    trap = ensemble.traps[candidates[rng.integers(len(candidates))]]
    trap.occupied = True
    return trap


def effective_gate_shift(ensemble: TrapEnsemble) -> float:
    """Summed gate-shift equivalent (V) of all occupied traps."""
    return float(sum(t.coupling for t in ensemble.traps if t.occupied))
