"""Clock-drive Hamiltonian and piecewise-constant pulse-sequence propagation.

The drive couples the orbital qubit to the motion of the trapped atom in the
strong-drive regime (Rabi frequency well above the trap frequency), where a
rectangular pulse addresses many motional sidebands at once.  In the frame
rotating at the drive frequency, with the rotating-wave approximation on the
optical carrier,

    H = omega a+a (x) I  -  delta |m><m| (x) I
        + (Omega/2) (e^{i phi} |m><g| (x) D(i eta) + h.c.)

with D(i eta) = exp(i eta (a + a+)) the photon-recoil kick built by
exponentiating the truncated (a + a+).  Pulse segments are ideal rectangles
applied back-to-back; segment phases +-x map to phi = 0 and phi = pi.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import hilbert
from .constants import HBAR
from .errors import DimensionMismatch, DomainError
from .hilbert import FockSpace, Operator, SpinMotionState

__all__ = [
    "DriveParams",
    "PulseSegment",
    "PulseSequence",
    "CORPSE90_ANGLES_DEG",
    "pi_pulse",
    "corpse90",
    "mpp",
    "sequence_for_label",
    "lamb_dicke",
    "build_hamiltonian",
    "segment_propagator",
    "propagate",
    "free_evolution",
    "phase_space_trajectory",
    "scan_optimal_rabi",
]

# One CORPSE block realizing a 90 degree target rotation: rotation angles in
# degrees about +x, -x, +x.
CORPSE90_ANGLES_DEG = (384.3, 318.6, 24.3)


@dataclass(frozen=True)
class DriveParams:
    """Drive configuration for the clock transition.

    rabi, detuning are angular frequencies in rad/s; phase in rad;
    lamb_dicke dimensionless.  detuning = drive frequency minus transition
    frequency.
    """

    fock: FockSpace
    rabi: float
    detuning: float = 0.0
    phase: float = 0.0
    lamb_dicke: float = 0.0

    def __post_init__(self):
        if self.rabi < 0:
            raise DomainError(f"rabi must be >= 0, got {self.rabi}")
        if self.lamb_dicke < 0:
            raise DomainError(f"lamb_dicke must be >= 0, got {self.lamb_dicke}")


@dataclass(frozen=True)
class PulseSegment:
    """One rectangular drive segment.

    angle is the nominal rotation at resonance (rad); the segment duration is
    angle / rabi.  phase is relative to the sequence frame; detuning, when
    set, overrides the drive detuning for this segment only (rad/s).
    """

    angle: float
    phase: float = 0.0
    detuning: float | None = None

    def __post_init__(self):
        if self.angle < 0:
            raise DomainError(f"segment angle must be >= 0, got {self.angle}")


@dataclass(frozen=True)
class PulseSequence:
    """An ordered list of segments with a label describing its role."""

    segments: tuple[PulseSegment, ...]
    label: str = "custom"

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise DomainError("pulse sequence must contain at least one segment")
        object.__setattr__(self, "segments", segs)
        if self.label == "corpse90":
            _require_corpse90(segs)
        elif self.label == "mpp":
            if len(segs) != 6:
                raise DomainError("mpp must be two corpse90 blocks (6 segments)")
            _require_corpse90(segs[:3])
            _require_corpse90(segs[3:])
        elif self.label == "pi":
            if len(segs) != 1 or not math.isclose(segs[0].angle, math.pi):
                raise DomainError("pi sequence must be a single pi-rotation segment")
        elif self.label != "custom":
            raise DomainError(f"unknown sequence label {self.label!r}")

    def total_angle(self) -> float:
        return sum(s.angle for s in self.segments)

    def duration(self, rabi: float) -> float:
        return self.total_angle() / rabi

    def to_json(self) -> str:
        doc = {
            "label": self.label,
            "segments": [
                {
                    "angle_deg": math.degrees(s.angle),
                    "phase_deg": math.degrees(s.phase),
                    "detuning_hz": None if s.detuning is None else s.detuning / (2 * math.pi),
                }
                for s in self.segments
            ],
        }
        return json.dumps(doc, indent=2)

    @staticmethod
    def from_json(text: str) -> "PulseSequence":
        doc = json.loads(text)
        segs = tuple(
            PulseSegment(
                angle=math.radians(s["angle_deg"]),
                phase=math.radians(s.get("phase_deg", 0.0)),
                detuning=None if s.get("detuning_hz") is None else 2 * math.pi * s["detuning_hz"],
            )
            for s in doc["segments"]
        )
        return PulseSequence(segs, doc.get("label", "custom"))


def _require_corpse90(segs) -> None:
    phases = (0.0, math.pi, 0.0)
    if len(segs) != 3:
        raise DomainError("corpse90 must have exactly 3 segments")
    for s, deg, ph in zip(segs, CORPSE90_ANGLES_DEG, phases):
        if not (math.isclose(s.angle, math.radians(deg)) and math.isclose(s.phase, ph)):
            raise DomainError("corpse90 segments must be 384.3@+x, 318.6@-x, 24.3@+x")


def pi_pulse() -> PulseSequence:
    return PulseSequence((PulseSegment(math.pi),), "pi")


def corpse90() -> PulseSequence:
    return PulseSequence(_corpse90_segments(), "corpse90")


def _corpse90_segments() -> tuple[PulseSegment, ...]:
    a1, a2, a3 = (math.radians(d) for d in CORPSE90_ANGLES_DEG)
    return (PulseSegment(a1, 0.0), PulseSegment(a2, math.pi), PulseSegment(a3, 0.0))


def mpp() -> PulseSequence:
    """Motional-state preserving pulse: two concatenated 90-degree CORPSE blocks."""
    return PulseSequence(_corpse90_segments() * 2, "mpp")


def sequence_for_label(label: str) -> PulseSequence:
    try:
        return {"pi": pi_pulse, "corpse90": corpse90, "mpp": mpp}[label]()
    except KeyError:
        raise DomainError(f"no predefined sequence with label {label!r}") from None


def lamb_dicke(wavelength: float, trap_frequency: float, mass: float) -> float:
    """eta = k x_zp = (2 pi / lambda) sqrt(hbar / (2 m omega))."""
    if wavelength <= 0 or trap_frequency <= 0 or mass <= 0:
        raise DomainError("wavelength, trap_frequency and mass must be positive")
    return (2 * math.pi / wavelength) * math.sqrt(HBAR / (2 * mass * trap_frequency))


# ---------------------------------------------------------------------------
# Hamiltonian and propagation
# ---------------------------------------------------------------------------

def build_hamiltonian(params: DriveParams) -> Operator:
    """Composite-space drive Hamiltonian for the given parameters (rad/s)."""
    fock = params.fock
    n_op = hilbert.number_operator(fock).matrix
    eye_m = np.eye(fock.dim)
    h = np.kron(np.eye(2), fock.trap_frequency * n_op)
    h -= params.detuning * np.kron(hilbert.projector_m().matrix, eye_m)
    if params.rabi != 0.0:
        a = hilbert.lowering_operator(fock).matrix
        kick = hilbert.matrix_exponential(-params.lamb_dicke * (a + a.conj().T), 1.0)
        coupling = (
            0.5
            * params.rabi
            * np.exp(1j * params.phase)
            * np.kron(hilbert.sigma_raise().matrix, kick)
        )
        h += coupling + coupling.conj().T
    return Operator(h, "composite")


def segment_propagator(segment: PulseSegment, params: DriveParams) -> np.ndarray:
    """Unitary for one rectangular segment of duration angle / rabi."""
    if params.rabi <= 0:
        raise DomainError("segment propagation requires rabi > 0")
    seg_params = replace(
        params,
        phase=params.phase + segment.phase,
        detuning=params.detuning if segment.detuning is None else segment.detuning,
    )
    h = build_hamiltonian(seg_params).matrix
    return hilbert._expm_hermitian_generator(h, segment.angle / params.rabi)


def propagate(state: SpinMotionState, seq: PulseSequence, params: DriveParams) -> SpinMotionState:
    """Apply the ordered segment propagators to the state.

    Trace and Hermiticity are re-checked after every segment through the
    SpinMotionState constructor.
    """
    if state.fock != params.fock:
        raise DimensionMismatch("state and drive parameters use different Fock spaces")
    out = state
    for seg in seq.segments:
        u = segment_propagator(seg, params)
        out = SpinMotionState(u @ out.rho @ u.conj().T, params.fock)
    return out


def free_evolution(state: SpinMotionState, params: DriveParams, duration: float) -> SpinMotionState:
    """Evolution with the drive off: trap rotation plus detuning phase only."""
    if duration < 0:
        raise DomainError("duration must be >= 0")
    if state.fock != params.fock:
        raise DimensionMismatch("state and drive parameters use different Fock spaces")
    h = build_hamiltonian(replace(params, rabi=0.0, phase=0.0)).matrix
    u = hilbert._expm_hermitian_generator(h, duration)
    return SpinMotionState(u @ state.rho @ u.conj().T, params.fock)


def phase_space_trajectory(
    state: SpinMotionState,
    seq: PulseSequence,
    params: DriveParams,
    samples_per_segment: int = 16,
) -> np.ndarray:
    """Sample (t, <x>, <p>) along the sequence, in zero-point units.

    Returns an array of rows (t, x, p); the first row is the initial state at
    t = 0 and each segment contributes samples_per_segment - 1 further rows up
    to and including its end point.
    """
    if samples_per_segment < 2:
        raise DomainError("samples_per_segment must be >= 2")
    if state.fock != params.fock:
        raise DimensionMismatch("state and drive parameters use different Fock spaces")
    x_op = hilbert.embed(hilbert.position_operator(params.fock), params.fock).matrix
    p_op = hilbert.embed(hilbert.momentum_operator(params.fock), params.fock).matrix

    rows = []
    rho = state.rho
    t0 = 0.0

    def record(t, r):
        rows.append((t, np.einsum("ij,ji->", r, x_op).real, np.einsum("ij,ji->", r, p_op).real))

    record(0.0, rho)
    for seg in seq.segments:
        seg_params = replace(
            params,
            phase=params.phase + seg.phase,
            detuning=params.detuning if seg.detuning is None else seg.detuning,
        )
        h = build_hamiltonian(seg_params).matrix
        w, v = np.linalg.eigh(h)
        t_seg = seg.angle / params.rabi
        rho_in = rho
        for k in range(1, samples_per_segment):
            t = t_seg * k / (samples_per_segment - 1)
            u = (v * np.exp(-1j * w * t)) @ v.conj().T
            r = u @ rho_in @ u.conj().T
            record(t0 + t, r)
        rho = r
        t0 += t_seg
    return np.array(rows)


def scan_optimal_rabi(
    params: DriveParams,
    rabi_range,
    seq_label: str = "mpp",
) -> list[tuple[float, float, float]]:
    """Transfer infidelity and final nbar versus Rabi frequency, from |g,0>.

    Returns (rabi, transfer_infidelity, final_nbar) per scanned value; no
    fitting is applied, callers pick minima themselves.
    """
    rabi_range = list(rabi_range)
    if not rabi_range:
        raise DomainError("rabi_range must be non-empty")
    if any(r <= 0 for r in rabi_range):
        raise DomainError("all scanned rabi values must be > 0")
    seq = sequence_for_label(seq_label)
    ground = hilbert.thermal_state(params.fock, 0.0, "g")
    n_comp = hilbert.embed(hilbert.number_operator(params.fock), params.fock).matrix
    p_m = hilbert.embed(hilbert.projector_m(), params.fock).matrix
    out = []
    for rabi in rabi_range:
        final = propagate(ground, seq, replace(params, rabi=rabi))
        transfer = np.einsum("ij,ji->", final.rho, p_m).real
        nbar = np.einsum("ij,ji->", final.rho, n_comp).real
        out.append((float(rabi), float(1.0 - transfer), float(nbar)))
    return out
