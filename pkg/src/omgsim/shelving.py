"""Shelving-experiment simulations: transfer error, heating, and clock suppression.

Repeated shelving between the ground and metastable manifolds is simulated as
an alternation of unitary pulse propagation and motional dephasing.  The
dephasing map stands in for the spread of trap frequencies across the array,
which randomizes the trap phase between shelves much faster than the
mid-circuit operations themselves; with it in place the wait time between
shelves carries no further information and only the decision to dephase
matters.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import drive, hilbert
from .constants import CLOCK_WAVELENGTH, YB171_MASS
from .errors import DomainError, TruncationWarning
from .drive import DriveParams, PulseSequence
from .hilbert import FockSpace, SpinMotionState

__all__ = [
    "ShelvingConfig",
    "ShelvingResult",
    "LightShiftConfig",
    "SuppressionResult",
    "TOP_LEVEL_WARN",
    "dephase_motional",
    "shelving_error",
    "suppression_error",
    "light_shift_heating",
    "shelving_experiment_params",
    "heating_experiment_config",
]

# Dynamical occupation of the top Fock level above which results are suspect.
TOP_LEVEL_WARN = 5e-3

# Operating point of the repeated-shelving experiments.  The shelving drive
# runs at 80 kHz Rabi frequency in shallow traps; the trap frequency there and
# the projection of the clock-beam recoil onto the measured radial mode are
# not published numbers, so they are explicit defaults here.  This combination
# reproduces the measured per-shelve heating of ~9e-2 (pi) and ~4e-3 (MPP).
SHELVING_TRAP_FREQ = 2 * math.pi * 8.7e3
SHELVING_RABI = 2 * math.pi * 80e3
RECOIL_PROJECTION = 0.5
SHELVING_NBAR = 0.05


@dataclass(frozen=True)
class ShelvingConfig:
    """Repeated-shelving experiment description."""

    seq: PulseSequence
    params: DriveParams
    wait_time: float = 2e-3
    n_shelves: int = 10
    dephase_between: bool = True
    initial_nbar: float = SHELVING_NBAR

    def __post_init__(self):
        if self.n_shelves < 1:
            raise DomainError("n_shelves must be >= 1")
        if self.wait_time < 0:
            raise DomainError("wait_time must be >= 0")


@dataclass(frozen=True)
class ShelvingResult:
    """Slopes and raw per-shelve curves from a repeated-shelving run."""

    error_per_shelve: float
    dnbar_per_shelve: float
    counts: np.ndarray
    ground_population: np.ndarray
    nbar: np.ndarray
    max_top_level: float
    truncation_exceeded: bool


@dataclass(frozen=True)
class LightShiftConfig:
    """Site-selective 532-nm light-shift operation.

    shift is the induced clock-transition shift in rad/s; heating_per_op is
    the measured motional heating per application of the operation.
    """

    shift: float = 2 * math.pi * 3e6
    ramp_profile: str = "linear"
    ramp_duration: float = 1.5e-3
    heating_per_op: float = 0.056

    def __post_init__(self):
        if self.ramp_duration < 0:
            raise DomainError("ramp_duration must be >= 0")
        if self.heating_per_op < 0:
            raise DomainError("heating_per_op must be >= 0")
        if self.ramp_profile not in ("linear", "smooth"):
            raise DomainError(f"unknown ramp profile {self.ramp_profile!r}")


def shelving_experiment_params(
    trap_frequency: float = SHELVING_TRAP_FREQ,
    rabi: float = SHELVING_RABI,
    n_max: int = 11,
    recoil_projection: float = RECOIL_PROJECTION,
) -> DriveParams:
    """Drive parameters of the repeated-shelving experiments.

    The Lamb-Dicke parameter is derived from the clock wavelength and the trap
    frequency, scaled by the projection of the beam k-vector onto the measured
    radial mode.
    """
    fock = FockSpace(n_max, trap_frequency)
    eta = drive.lamb_dicke(CLOCK_WAVELENGTH, trap_frequency, YB171_MASS)
    return DriveParams(fock, rabi=rabi, lamb_dicke=eta * recoil_projection)


def heating_experiment_config(label: str, n_shelves: int = 10, **kwargs) -> ShelvingConfig:
    """Ready-made config for the heating-per-shelve comparison ('pi' or 'mpp')."""
    return ShelvingConfig(
        seq=drive.sequence_for_label(label),
        params=shelving_experiment_params(**kwargs),
        n_shelves=n_shelves,
    )


def dephase_motional(state: SpinMotionState) -> SpinMotionState:
    """Erase all motional coherences, keeping both marginals.

    Returns rho_orbital (x) diag(rho_motional).  Trace, <n> and the orbital
    populations are preserved exactly, and the map is idempotent.
    """
    rho_orb = state.reduced_orbital()
    p_mot = np.diag(state.reduced_motional()).real
    rho = np.kron(rho_orb, np.diag(p_mot)).astype(complex)
    return SpinMotionState(rho, state.fock, validate=False)


def _linear_slope(x: np.ndarray, y: np.ndarray) -> float:
    if x.size < 2:
        raise DomainError("slope extraction needs at least two points")
    return float(np.polyfit(x, y, 1)[0])


def shelving_error(cfg: ShelvingConfig) -> ShelvingResult:
    """Simulate repeated shelving and extract per-shelve error and heating.

    The pulse sequence is applied n_shelves times; between applications the
    state is either motionally dephased (dephase_between) or evolved freely
    for wait_time.  The per-shelve error eps_S is the slope of the
    ground-state population over odd shelve counts and the heating rate is the
    slope of <n> over even counts, both by unweighted least squares.
    """
    params = cfg.params
    fock = params.fock
    n = fock.dim
    seq_u = np.eye(fock.composite_dim, dtype=complex)
    for seg in cfg.seq.segments:
        seq_u = drive.segment_propagator(seg, params) @ seq_u
    if not cfg.dephase_between and cfg.wait_time > 0:
        h_free = drive.build_hamiltonian(replace(params, rabi=0.0, phase=0.0)).matrix
        wait_u = hilbert._expm_hermitian_generator(h_free, cfg.wait_time)
    else:
        wait_u = None

    n_vec = np.arange(n)
    rho = hilbert.thermal_state(fock, cfg.initial_nbar, "g").rho
    counts = np.arange(1, cfg.n_shelves + 1)
    ground = np.empty(cfg.n_shelves)
    nbars = np.empty(cfg.n_shelves)
    max_top = 0.0
    for i in range(cfg.n_shelves):
        rho = seq_u @ rho @ seq_u.conj().T
        blocks = rho.reshape(2, n, 2, n)
        p_mot = np.real(np.einsum("imin->mn", blocks).diagonal())
        max_top = max(max_top, float(p_mot[-1]))
        if cfg.dephase_between:
            rho_orb = np.einsum("imjm->ij", blocks)
            rho = np.kron(rho_orb, np.diag(p_mot)).astype(complex)
        elif wait_u is not None:
            rho = wait_u @ rho @ wait_u.conj().T
        blocks = rho.reshape(2, n, 2, n)
        rho_orb = np.einsum("imjm->ij", blocks)
        ground[i] = rho_orb[hilbert.ORBITAL_G, hilbert.ORBITAL_G].real
        nbars[i] = float(np.real(np.einsum("imin->mn", blocks).diagonal()) @ n_vec)

    exceeded = max_top > TOP_LEVEL_WARN
    if exceeded:
        warnings.warn(
            f"top Fock level reached occupation {max_top:.2e} > {TOP_LEVEL_WARN}; "
            "increase n_max",
            TruncationWarning,
        )
    odd = counts % 2 == 1
    even = ~odd
    eps = _linear_slope(counts[odd], ground[odd]) if odd.sum() >= 2 else float(ground[0])
    dnbar = (
        _linear_slope(counts[even], nbars[even])
        if even.sum() >= 2
        else float(nbars[-1] - cfg.initial_nbar)
    )
    return ShelvingResult(
        error_per_shelve=eps,
        dnbar_per_shelve=dnbar,
        counts=counts,
        ground_population=ground,
        nbar=nbars,
        max_top_level=max_top,
        truncation_exceeded=exceeded,
    )


@dataclass(frozen=True)
class SuppressionResult:
    """Simulated excitation under a light shift, with the analytic envelope."""

    simulated: float
    lorentzian_envelope: float


def suppression_error(
    params: DriveParams, light_shift: float, seq: PulseSequence
) -> SuppressionResult:
    """Excitation probability of a light-shifted site under a shelving pulse.

    The shift takes the clock transition out of resonance, so the drive is
    detuned by -light_shift for the whole sequence.  The analytic far-off-
    resonant envelope Omega^2 / (Omega^2 + shift^2) is returned alongside;
    composite sequences can deviate from it at small shift because CORPSE is
    built to tolerate detuning errors.
    """
    if params.rabi <= 0:
        raise DomainError("suppression_error requires rabi > 0")
    shifted = replace(params, detuning=-light_shift)
    ground = hilbert.thermal_state(params.fock, 0.0, "g")
    final = drive.propagate(ground, seq, shifted)
    _, p_m = final.orbital_populations()
    envelope = params.rabi**2 / (params.rabi**2 + light_shift**2)
    return SuppressionResult(simulated=float(p_m), lorentzian_envelope=float(envelope))


def light_shift_heating(n_ops: int, cfg: LightShiftConfig = LightShiftConfig()) -> float:
    """Motional quanta accumulated after n_ops light-shift operations.

    Bookkeeping model: the measured constant heating per operation times the
    number of operations; the ramp shape is not simulated dynamically.
    """
    if n_ops < 0:
        raise DomainError("n_ops must be >= 0")
    return n_ops * cfg.heating_per_op
