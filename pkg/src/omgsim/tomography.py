"""Quantum process tomography by iterative maximum-likelihood estimation.

The process is reconstructed as a Choi matrix constrained to be completely
positive and trace preserving, using the diluted R-rho-R fixed-point
iteration: each step conjugates the current Choi matrix by a data-dependent
positive operator and renormalizes with the Lagrange operator that restores
trace preservation.  Dilution (mixing the update with the identity) is
adapted so the log-likelihood never decreases.

Conventions: the Choi matrix lives on input (x) output with
C = sum_ij |i><j| (x) E(|i><j|), so Tr C = d for trace-preserving E and
p(outcome l | input k) = Tr[C (rho_k^T (x) M_l)].  The chi matrix is
expressed in the Pauli basis {I, X, Y, Z} and normalized so the identity
process is diag(1, 0, 0, 0).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConvergenceWarning,
    DomainError,
    EmptyDataError,
    IncompleteDataError,
)

__all__ = [
    "PAULIS",
    "TomographyDataset",
    "ProcessMatrix",
    "FidelityReport",
    "default_input_states",
    "pauli_effects",
    "reconstruct_process",
    "choi_to_chi",
    "chi_to_choi",
    "process_fidelity",
    "average_fidelity",
    "loss_scaled_fidelity",
    "ideal_mcm_process",
    "rotation_z",
    "rotation_x",
    "rotation_y",
    "unitary_choi",
    "depolarizing_choi",
    "channel_probabilities",
    "simulate_dataset",
]

_I = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (_I, _X, _Y, _Z)

CP_TOL = -1e-9
TP_TOL = 1e-8


def rotation_x(angle: float) -> np.ndarray:
    return np.cos(angle / 2) * _I - 1j * np.sin(angle / 2) * _X


def rotation_y(angle: float) -> np.ndarray:
    return np.cos(angle / 2) * _I - 1j * np.sin(angle / 2) * _Y


def rotation_z(angle: float) -> np.ndarray:
    return np.cos(angle / 2) * _I - 1j * np.sin(angle / 2) * _Z


def _state_to_dm(state) -> np.ndarray:
    arr = np.asarray(state, dtype=complex)
    if arr.shape == (2,):
        return np.outer(arr, arr.conj())
    if arr.shape == (2, 2):
        return arr
    if arr.shape == (3,) and np.isrealobj(np.asarray(state)):
        x, y, z = np.asarray(state, dtype=float)
        if x * x + y * y + z * z > 1.0 + 1e-9:
            raise DomainError("Bloch vector must have norm <= 1")
        return 0.5 * (_I + x * _X + y * _Y + z * _Z)
    raise DomainError("input state must be a 2-vector, 2x2 matrix, or Bloch 3-vector")


def default_input_states() -> list[np.ndarray]:
    """The standard informationally complete preparation set.

    |0>, |1>, (|0>+|1>)/sqrt2 and (|0>-i|1>)/sqrt2.
    """
    s = 1 / np.sqrt(2)
    return [
        np.array([1, 0], dtype=complex),
        np.array([0, 1], dtype=complex),
        np.array([s, s], dtype=complex),
        np.array([s, -1j * s], dtype=complex),
    ]


def pauli_effects() -> list[np.ndarray]:
    """Six-outcome POVM from measuring X, Y or Z with equal probability."""
    effects = []
    for basis in (_X, _Y, _Z):
        w, v = np.linalg.eigh(basis)
        for k in range(2):
            proj = np.outer(v[:, k], v[:, k].conj())
            effects.append(proj / 3.0)
    return effects


@dataclass
class TomographyDataset:
    """Counts from preparing input states and measuring a fixed POVM.

    counts[k, l] is the number of events for input k and effect l; rows are
    conditioned on the atom surviving, with the survival probability itself
    carried separately in `survival` and applied only at the fidelity-report
    stage, never inside the CPTP reconstruction.
    """

    input_states: list
    effects: list
    counts: np.ndarray
    survival: np.ndarray | None = None

    def __post_init__(self):
        self.input_states = [_state_to_dm(s) for s in self.input_states]
        self.effects = [np.asarray(e, dtype=complex) for e in self.effects]
        self.counts = np.asarray(self.counts, dtype=float)
        if self.counts.shape != (len(self.input_states), len(self.effects)):
            raise DomainError(
                f"counts shape {self.counts.shape} does not match "
                f"{len(self.input_states)} inputs x {len(self.effects)} effects"
            )
        if np.any(self.counts < 0):
            raise DomainError("counts must be >= 0")
        total = sum(self.effects)
        if np.abs(total - _I).max() > 1e-10:
            raise DomainError("measurement effects must sum to the identity")
        if self.survival is None:
            self.survival = np.ones(len(self.input_states))
        else:
            self.survival = np.asarray(self.survival, dtype=float)
            if self.survival.shape != (len(self.input_states),):
                raise DomainError("survival must hold one probability per input")
            if np.any((self.survival < 0) | (self.survival > 1)):
                raise DomainError("survival probabilities must lie in [0, 1]")

    def drop_empty_settings(self) -> "TomographyDataset":
        keep = self.counts.sum(axis=1) > 0
        if keep.all():
            return self
        warnings.warn("dropping input settings with zero total counts", UserWarning)
        return TomographyDataset(
            [s for s, k in zip(self.input_states, keep) if k],
            self.effects,
            self.counts[keep],
            self.survival[keep],
        )

    def to_json_dict(self) -> dict:
        def mat(m):
            return [[[float(x.real), float(x.imag)] for x in row] for row in m]

        return {
            "inputs": [mat(s) for s in self.input_states],
            "effects": [mat(e) for e in self.effects],
            "counts": self.counts.tolist(),
            "survival": self.survival.tolist(),
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "TomographyDataset":
        def unmat(m):
            a = np.asarray(m, dtype=float)
            return a[..., 0] + 1j * a[..., 1]

        inputs = [
            unmat(s) if np.asarray(s).ndim == 3 else np.asarray(s, dtype=float)
            for s in doc["inputs"]
        ]
        effects = [unmat(e) for e in doc["effects"]]
        return TomographyDataset(
            inputs, effects, np.asarray(doc["counts"], dtype=float), doc.get("survival")
        )


# ---------------------------------------------------------------------------
# Choi / chi machinery
# ---------------------------------------------------------------------------

def _pauli_pair_choi() -> np.ndarray:
    """Choi matrices of rho -> P_m rho P_n, flattened into a 16x16 basis."""
    basis = np.empty((16, 16), dtype=complex)
    col = 0
    eye = np.eye(2)
    for m in range(4):
        for n in range(4):
            c = np.zeros((4, 4), dtype=complex)
            for i in range(2):
                for j in range(2):
                    ketbra = np.outer(eye[i], eye[j])
                    c += np.kron(ketbra, PAULIS[m] @ ketbra @ PAULIS[n])
            basis[:, col] = c.ravel()
            col += 1
    return basis


_PAULI_BASIS = _pauli_pair_choi()
_PAULI_BASIS_INV = np.linalg.inv(_PAULI_BASIS)


def choi_to_chi(choi: np.ndarray) -> np.ndarray:
    """Convert a Choi matrix to the chi matrix in the Pauli basis."""
    vec = _PAULI_BASIS_INV @ np.asarray(choi, dtype=complex).ravel()
    return vec.reshape(4, 4)


def chi_to_choi(chi: np.ndarray) -> np.ndarray:
    vec = _PAULI_BASIS @ np.asarray(chi, dtype=complex).ravel()
    return vec.reshape(4, 4)


def unitary_choi(u: np.ndarray) -> np.ndarray:
    """Choi matrix of rho -> U rho U+."""
    u = np.asarray(u, dtype=complex)
    c = np.zeros((4, 4), dtype=complex)
    eye = np.eye(2)
    for i in range(2):
        for j in range(2):
            ketbra = np.outer(eye[i], eye[j])
            c += np.kron(ketbra, u @ ketbra @ u.conj().T)
    return c


def depolarizing_choi(p: float) -> np.ndarray:
    """Choi matrix of the depolarizing channel rho -> (1-p) rho + p I/2."""
    if not 0 <= p <= 4 / 3:
        raise DomainError("depolarizing strength must lie in [0, 4/3]")
    chi = np.diag([1 - 3 * p / 4, p / 4, p / 4, p / 4]).astype(complex)
    return chi_to_choi(chi)


@dataclass
class ProcessMatrix:
    """CPTP process in both Choi and chi representations."""

    choi: np.ndarray
    d: int = 2
    require_tp: bool = field(default=True, repr=False)

    def __post_init__(self):
        self.choi = np.asarray(self.choi, dtype=complex)
        if self.choi.shape != (self.d**2, self.d**2):
            raise DomainError(f"Choi matrix must be {self.d ** 2}x{self.d ** 2}")
        herm = np.abs(self.choi - self.choi.conj().T).max()
        if herm > 1e-9:
            raise DomainError(f"Choi matrix deviates from Hermiticity by {herm:.2e}")
        lo = np.linalg.eigvalsh(self.choi)[0]
        if lo < CP_TOL:
            raise DomainError(f"Choi matrix has negative eigenvalue {lo:.2e}")
        if self.require_tp:
            dev = np.abs(self.partial_trace_out() - np.eye(self.d)).max()
            if dev > TP_TOL:
                raise DomainError(f"process deviates from trace preservation by {dev:.2e}")

    def partial_trace_out(self) -> np.ndarray:
        c = self.choi.reshape(self.d, self.d, self.d, self.d)
        return np.einsum("imjm->ij", c)

    @property
    def chi(self) -> np.ndarray:
        return choi_to_chi(self.choi)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        c = self.choi.reshape(self.d, self.d, self.d, self.d)
        return np.einsum("ij,imjn->mn", np.asarray(rho, dtype=complex), c)

    @staticmethod
    def from_unitary(u: np.ndarray) -> "ProcessMatrix":
        return ProcessMatrix(unitary_choi(u))

    @staticmethod
    def from_chi(chi: np.ndarray, require_tp: bool = True) -> "ProcessMatrix":
        return ProcessMatrix(chi_to_choi(chi), require_tp=require_tp)


def channel_probabilities(choi: np.ndarray, inputs, effects) -> np.ndarray:
    """p[k, l] = Tr[E(rho_k) M_l] evaluated through the Choi matrix."""
    rhos = [_state_to_dm(s) for s in inputs]
    p = np.empty((len(rhos), len(effects)))
    for k, rho in enumerate(rhos):
        for l, eff in enumerate(effects):
            op = np.kron(rho.T, np.asarray(eff, dtype=complex))
            p[k, l] = np.real(np.einsum("ij,ji->", choi, op))
    return np.clip(p, 0.0, None)


def simulate_dataset(choi, shots: int, rng, inputs=None, effects=None, survival=None):
    """Multinomial counts from a channel, for oracles and synthetic data."""
    inputs = default_input_states() if inputs is None else inputs
    effects = pauli_effects() if effects is None else effects
    p = channel_probabilities(choi, inputs, effects)
    p /= p.sum(axis=1, keepdims=True)
    counts = np.stack([rng.multinomial(shots, row) for row in p])
    return TomographyDataset(inputs, effects, counts, survival)


# ---------------------------------------------------------------------------
# Reconstruction
# ---------------------------------------------------------------------------

def _check_complete(rhos, effects) -> None:
    rows = [np.kron(r.T, np.asarray(e, dtype=complex)).ravel() for r in rhos for e in effects]
    rank = np.linalg.matrix_rank(np.array(rows), tol=1e-10)
    if rank < 16:
        raise IncompleteDataError(
            f"preparations x effects span rank {rank} < 16; add settings"
        )


def reconstruct_process(
    data: TomographyDataset,
    max_iter: int = 10000,
    tol: float = 1e-10,
) -> tuple[ProcessMatrix, np.ndarray]:
    """Maximum-likelihood CPTP Choi matrix for the dataset.

    Returns the process and the log-likelihood trace, one entry per accepted
    iteration; the trace is non-decreasing by construction.  Stops when the
    improvement drops below tol, or warns if max_iter is exhausted.
    """
    data = data.drop_empty_settings()
    if data.counts.size == 0 or data.counts.sum() == 0:
        raise EmptyDataError("dataset contains no events")
    rhos = data.input_states
    effects = data.effects
    _check_complete(rhos, effects)

    freq = data.counts / data.counts.sum(axis=1, keepdims=True)
    ops = np.stack([np.kron(r.T, e) for r in rhos for e in effects])
    f_flat = freq.ravel()
    active = f_flat > 0

    def probs(c):
        return np.clip(np.real(np.einsum("aij,ji->a", ops, c)), 1e-300, None)

    def loglik(p):
        return float(np.dot(f_flat[active], np.log(p[active])))

    def tp_project(k):
        tr_out = np.einsum("imjm->ij", k.reshape(2, 2, 2, 2))
        w, v = np.linalg.eigh(tr_out)
        w = np.clip(w, 1e-300, None)
        inv_sqrt = (v / np.sqrt(w)) @ v.conj().T
        lam = np.kron(inv_sqrt, np.eye(2))
        out = lam @ k @ lam.conj().T
        return (out + out.conj().T) / 2.0

    choi = np.eye(4, dtype=complex) / 2.0
    p = probs(choi)
    ll = loglik(p)
    trace = [ll]
    dilution = 1.0
    eye = np.eye(4, dtype=complex)
    converged = False
    for _ in range(max_iter):
        ratio = np.where(p > 0, f_flat / p, 0.0)
        r_op = np.einsum("a,aij->ij", ratio, ops)
        r_op = (r_op + r_op.conj().T) / 2.0
        accepted = False
        while dilution > 1e-12:
            step = (eye + dilution * r_op) / (1.0 + dilution)
            cand = tp_project(step @ choi @ step.conj().T)
            p_cand = probs(cand)
            ll_cand = loglik(p_cand)
            if ll_cand >= ll - 1e-15:
                accepted = True
                break
            dilution /= 2.0
        if not accepted:
            converged = True
            break
        improvement = ll_cand - ll
        choi, p, ll = cand, p_cand, ll_cand
        trace.append(ll)
        dilution = min(1.0, dilution * 2.0)
        if improvement < tol:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"MLE stopped at max_iter={max_iter} before reaching tol={tol}",
            ConvergenceWarning,
        )
    # Round-off guard: clip tiny negative eigenvalues before validation.
    w, v = np.linalg.eigh(choi)
    if w[0] < 0 and w[0] > CP_TOL:
        choi = (v * np.clip(w, 0, None)) @ v.conj().T
        choi = tp_project(choi)
    return ProcessMatrix(choi), np.array(trace)


# ---------------------------------------------------------------------------
# Fidelities
# ---------------------------------------------------------------------------

def process_fidelity(chi, chi_ideal) -> float:
    """F_p = Tr(chi chi_ideal) for normalized chi matrices."""
    return float(np.real(np.einsum("ij,ji->", np.asarray(chi), np.asarray(chi_ideal))))


def average_fidelity(f_p: float, d: int = 2) -> float:
    """F_av = (d F_p + 1) / (d + 1)."""
    return (d * f_p + 1.0) / (d + 1.0)


def loss_scaled_fidelity(f_av: float, survival: float) -> float:
    """Scale an average fidelity by the probability of no loss or shelving error."""
    if not 0.0 <= survival <= 1.0:
        raise DomainError(f"survival must lie in [0, 1], got {survival}")
    return f_av * survival


def ideal_mcm_process(theta_1: float, theta_2: float) -> ProcessMatrix:
    """Reference process R_Z(theta_1) R_X(pi) R_Z(theta_2).

    With theta_1 = -theta_2 = pi/2 this equals R_Y(pi) up to global phase,
    the echo-compensated rotation a data qubit undergoes during the
    measurement window.
    """
    u = rotation_z(theta_1) @ rotation_x(np.pi) @ rotation_z(theta_2)
    return ProcessMatrix.from_unitary(u)


@dataclass(frozen=True)
class FidelityReport:
    """Process and average state fidelities, with optional loss scaling."""

    f_p: float
    f_av: float
    f_av_loss_scaled: float | None = None
    per_input_fidelity: tuple[float, ...] | None = None

    @staticmethod
    def from_process(
        proc: ProcessMatrix,
        chi_ideal: np.ndarray,
        survival: float | None = None,
        inputs=None,
        ideal_unitary: np.ndarray | None = None,
    ) -> "FidelityReport":
        f_p = process_fidelity(proc.chi, chi_ideal)
        f_av = average_fidelity(f_p, proc.d)
        scaled = None if survival is None else loss_scaled_fidelity(f_av, survival)
        per_input = None
        if inputs is not None and ideal_unitary is not None:
            fids = []
            for s in inputs:
                rho_in = _state_to_dm(s)
                rho_out = proc.apply(rho_in)
                ideal = ideal_unitary @ rho_in @ ideal_unitary.conj().T
                if survival is not None:
                    rho_out = rho_out * survival
                fids.append(float(np.real(np.einsum("ij,ji->", ideal, rho_out))))
            per_input = tuple(fids)
        return FidelityReport(f_p, f_av, scaled, per_input)

    def to_dict(self) -> dict:
        doc = {"f_p": self.f_p, "f_av": self.f_av}
        if self.f_av_loss_scaled is not None:
            doc["f_av_loss_scaled"] = self.f_av_loss_scaled
        if self.per_input_fidelity is not None:
            doc["per_input_fidelity"] = list(self.per_input_fidelity)
        return doc
