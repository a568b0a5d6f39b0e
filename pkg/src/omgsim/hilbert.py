"""Dense quantum-state primitives on the composite spin-motion Hilbert space.

Everything downstream works on a two-level orbital degree of freedom (the
ground manifold ``g`` and the metastable manifold ``m``) tensored with a
truncated harmonic-oscillator Fock space.  The basis ordering is fixed
globally as ``|orbital> (x) |n>`` with orbital index 0 = g, 1 = m; all
modules must build composite operators with that ordering.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ClampWarning,
    DimensionMismatch,
    DomainError,
    NonHermitianError,
    TruncationError,
)

__all__ = [
    "FockSpace",
    "Operator",
    "SpinMotionState",
    "ORBITAL_G",
    "ORBITAL_M",
    "orbital_state",
    "lowering_operator",
    "raising_operator",
    "number_operator",
    "position_operator",
    "momentum_operator",
    "displacement_operator",
    "sigma_x",
    "sigma_y",
    "sigma_z",
    "sigma_raise",
    "projector_g",
    "projector_m",
    "embed",
    "thermal_state",
    "expectation",
    "matrix_exponential",
]

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-10
POSITIVITY_TOL = -1e-10
THERMAL_TAIL_TOL = 1e-3

# Orbital basis indices, fixed package-wide.
ORBITAL_G = 0
ORBITAL_M = 1


@dataclass(frozen=True)
class FockSpace:
    """Truncated single-mode oscillator: levels 0..n_max at trap frequency omega.

    Parameters
    ----------
    n_max : int
        Largest retained motional quantum number (>= 1).
    trap_frequency : float
        Angular trap frequency omega in rad/s (> 0).
    """

    n_max: int
    trap_frequency: float

    def __post_init__(self):
        if self.n_max < 1:
            raise DomainError(f"n_max must be >= 1, got {self.n_max}")
        if self.trap_frequency <= 0:
            raise DomainError(f"trap_frequency must be > 0, got {self.trap_frequency}")

    @property
    def dim(self) -> int:
        return self.n_max + 1

    @property
    def composite_dim(self) -> int:
        return 2 * self.dim


@dataclass(frozen=True)
class Operator:
    """A dense matrix tagged with the space it acts on.

    ``space`` is one of ``"orbital"`` (2x2), ``"motion"`` (one Fock mode) or
    ``"composite"`` (orbital tensor motion).  The tag is what allows
    :func:`expectation` to lift single-space operators onto the composite
    space without silent dimension bugs.
    """

    matrix: np.ndarray
    space: str

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch(f"operator matrix must be square, got shape {m.shape}")
        if self.space not in ("orbital", "motion", "composite"):
            raise DomainError(f"unknown operator space tag {self.space!r}")
        if self.space == "orbital" and m.shape[0] != 2:
            raise DimensionMismatch("orbital operators are 2x2")
        object.__setattr__(self, "matrix", m)

    def __array__(self, dtype=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dagger(self) -> "Operator":
        return Operator(self.matrix.conj().T, self.space)


def _as_matrix(op) -> np.ndarray:
    return op.matrix if isinstance(op, Operator) else np.asarray(op, dtype=complex)


# ---------------------------------------------------------------------------
# Operator builders
# ---------------------------------------------------------------------------

def lowering_operator(fock: FockSpace) -> Operator:
    """Annihilation operator a on the truncated Fock space.

    On the truncated space [a, a+] equals the identity only on the upper-left
    n_max x n_max block; the (n_max, n_max) element is -n_max.
    """
    n = np.arange(1, fock.dim)
    a = np.zeros((fock.dim, fock.dim), dtype=complex)
    a[n - 1, n] = np.sqrt(n)
    return Operator(a, "motion")


def raising_operator(fock: FockSpace) -> Operator:
    return lowering_operator(fock).dagger()


def number_operator(fock: FockSpace) -> Operator:
    return Operator(np.diag(np.arange(fock.dim, dtype=float)).astype(complex), "motion")


def position_operator(fock: FockSpace) -> Operator:
    """x in zero-point units: x = (a + a+)/sqrt(2), vacuum variance 1/2."""
    a = lowering_operator(fock).matrix
    return Operator((a + a.conj().T) / np.sqrt(2), "motion")


def momentum_operator(fock: FockSpace) -> Operator:
    """p in zero-point units: p = (a - a+)/(i sqrt(2))."""
    a = lowering_operator(fock).matrix
    return Operator((a - a.conj().T) / (1j * np.sqrt(2)), "motion")


def displacement_operator(fock: FockSpace, alpha: complex) -> Operator:
    """D(alpha) = exp(alpha a+ - conj(alpha) a), built on the truncated space."""
    a = lowering_operator(fock).matrix
    gen = alpha * a.conj().T - np.conj(alpha) * a
    # gen is anti-Hermitian; exponentiate through its Hermitian form.
    u = _expm_hermitian_generator(1j * gen, 1.0)
    return Operator(u, "motion")


def sigma_x() -> Operator:
    return Operator(np.array([[0, 1], [1, 0]], dtype=complex), "orbital")


def sigma_y() -> Operator:
    return Operator(np.array([[0, -1j], [1j, 0]], dtype=complex), "orbital")


def sigma_z() -> Operator:
    return Operator(np.array([[1, 0], [0, -1]], dtype=complex), "orbital")


def sigma_raise() -> Operator:
    """|m><g|: raises the orbital from ground to metastable."""
    m = np.zeros((2, 2), dtype=complex)
    m[ORBITAL_M, ORBITAL_G] = 1.0
    return Operator(m, "orbital")


def projector_g() -> Operator:
    p = np.zeros((2, 2), dtype=complex)
    p[ORBITAL_G, ORBITAL_G] = 1.0
    return Operator(p, "orbital")


def projector_m() -> Operator:
    p = np.zeros((2, 2), dtype=complex)
    p[ORBITAL_M, ORBITAL_M] = 1.0
    return Operator(p, "orbital")


def embed(op: Operator, fock: FockSpace) -> Operator:
    """Lift an orbital-only or motion-only operator onto the composite space."""
    if op.space == "composite":
        if op.dim != fock.composite_dim:
            raise DimensionMismatch(
                f"composite operator of dim {op.dim} does not match space dim {fock.composite_dim}"
            )
        return op
    if op.space == "orbital":
        return Operator(np.kron(op.matrix, np.eye(fock.dim)), "composite")
    if op.dim != fock.dim:
        raise DimensionMismatch(
            f"motion operator of dim {op.dim} does not match Fock dim {fock.dim}"
        )
    return Operator(np.kron(np.eye(2), op.matrix), "composite")


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------

def orbital_state(which) -> np.ndarray:
    """Return a normalized 2-vector for 'g', 'm', or any explicit amplitude pair."""
    if isinstance(which, str):
        key = which.lower()
        if key == "g":
            return np.array([1.0, 0.0], dtype=complex)
        if key == "m":
            return np.array([0.0, 1.0], dtype=complex)
        raise DomainError(f"unknown orbital label {which!r}")
    v = np.asarray(which, dtype=complex).reshape(-1)
    if v.shape != (2,):
        raise DimensionMismatch("orbital state must be a 2-vector")
    norm = np.linalg.norm(v)
    if norm == 0:
        raise DomainError("orbital state must be non-zero")
    return v / norm


@dataclass
class SpinMotionState:
    """Density matrix on (orbital) (x) (truncated Fock space).

    The constructor enforces Hermiticity to 1e-12, unit trace to 1e-10 and
    positivity down to -1e-10; tiny negative eigenvalues from round-off can
    be repaired with :meth:`clamp_positive` before handing the state to
    sampling or tomography code.
    """

    rho: np.ndarray
    fock: FockSpace
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=complex)
        d = self.fock.composite_dim
        if self.rho.shape != (d, d):
            raise DimensionMismatch(
                f"state matrix shape {self.rho.shape} does not match composite dim {d}"
            )
        if self.validate:
            herm = np.abs(self.rho - self.rho.conj().T).max()
            if herm > HERMITICITY_TOL:
                raise DomainError(f"state is not Hermitian: max deviation {herm:.3e}")
            tr = self.rho.trace().real
            if abs(tr - 1.0) > TRACE_TOL:
                raise DomainError(f"state trace {tr} deviates from 1 beyond tolerance")
            lo = np.linalg.eigvalsh(self.rho)[0]
            if lo < POSITIVITY_TOL:
                raise DomainError(f"state has negative eigenvalue {lo:.3e}")

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    def _blocks(self) -> np.ndarray:
        n = self.fock.dim
        return self.rho.reshape(2, n, 2, n)

    def reduced_orbital(self) -> np.ndarray:
        """Partial trace over motion: 2x2 orbital density matrix."""
        return np.einsum("imjm->ij", self._blocks())

    def reduced_motional(self) -> np.ndarray:
        """Partial trace over the orbital degree of freedom."""
        return np.einsum("imin->mn", self._blocks())

    def orbital_populations(self) -> tuple[float, float]:
        r = self.reduced_orbital()
        return r[ORBITAL_G, ORBITAL_G].real, r[ORBITAL_M, ORBITAL_M].real

    def motional_populations(self) -> np.ndarray:
        return np.diag(self.reduced_motional()).real

    @property
    def nbar(self) -> float:
        p = self.motional_populations()
        return float(np.dot(p, np.arange(p.size)))

    @property
    def top_level_population(self) -> float:
        return float(self.motional_populations()[-1])

    def purity(self) -> float:
        return float(np.vdot(self.rho, self.rho).real)

    def clamp_positive(self) -> "SpinMotionState":
        """Clip tiny negative eigenvalues to zero and renormalize."""
        w, v = np.linalg.eigh(self.rho)
        if w[0] >= 0:
            return self
        if w[0] < POSITIVITY_TOL:
            raise DomainError(f"eigenvalue {w[0]:.3e} too negative to clamp")
        warnings.warn("clamping negative state eigenvalues to zero", ClampWarning)
        w = np.clip(w, 0.0, None)
        rho = (v * w) @ v.conj().T
        rho /= rho.trace().real
        return SpinMotionState(rho, self.fock)

    def copy(self) -> "SpinMotionState":
        return SpinMotionState(self.rho.copy(), self.fock, validate=False)


def thermal_state(fock: FockSpace, nbar: float, orbital="g") -> SpinMotionState:
    """Thermal motional state at mean occupation nbar, tensored with a pure orbital.

    Populations follow the geometric law p_n = (1/(1+nbar)) (nbar/(1+nbar))^n,
    renormalized on the truncated space.  The geometric tail beyond n_max must
    carry less than 1e-3 of the population, otherwise the truncation is judged
    unsafe and a TruncationError is raised.
    """
    if nbar < 0:
        raise DomainError(f"nbar must be >= 0, got {nbar}")
    v = orbital_state(orbital)
    if nbar == 0:
        p = np.zeros(fock.dim)
        p[0] = 1.0
    else:
        q = nbar / (1.0 + nbar)
        tail = q ** (fock.n_max + 1)
        if tail >= THERMAL_TAIL_TOL:
            raise TruncationError(
                f"thermal tail mass {tail:.3e} beyond n_max={fock.n_max} exceeds "
                f"{THERMAL_TAIL_TOL}; increase n_max"
            )
        p = (1.0 - q) * q ** np.arange(fock.dim)
        p /= p.sum()
    rho_orb = np.outer(v, v.conj())
    rho = np.kron(rho_orb, np.diag(p)).astype(complex)
    return SpinMotionState(rho, fock)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def expectation(state: SpinMotionState, op) -> complex:
    """Tr(rho O).  Orbital- or motion-tagged operators are lifted automatically."""
    if isinstance(op, Operator) and op.space != "composite":
        op = embed(op, state.fock)
    m = _as_matrix(op)
    if m.shape != state.rho.shape:
        raise DimensionMismatch(
            f"operator shape {m.shape} does not match state shape {state.rho.shape}"
        )
    return complex(np.einsum("ij,ji->", state.rho, m))


def _expm_hermitian_generator(h: np.ndarray, t: float) -> np.ndarray:
    """exp(-i h t) for Hermitian h, via eigendecomposition (exact for our sizes)."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def matrix_exponential(h, t: float = 1.0):
    """Unitary propagator U = exp(-i H t) of a Hermitian generator.

    Parameters
    ----------
    h : Operator or ndarray
        Hermitian generator (checked to 1e-10 in max norm).
    t : float
        Evolution duration in seconds (H is then in rad/s), or 1.0 to
        exponentiate a dimensionless generator.

    Returns
    -------
    Operator or ndarray matching the input type.
    """
    m = _as_matrix(h)
    dev = np.abs(m - m.conj().T).max()
    if dev > 1e-10:
        raise NonHermitianError(f"generator deviates from Hermiticity by {dev:.3e}")
    u = _expm_hermitian_generator((m + m.conj().T) / 2.0, t)
    if isinstance(h, Operator):
        return Operator(u, h.space)
    return u
