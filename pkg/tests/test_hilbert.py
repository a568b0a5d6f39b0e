import numpy as np
import pytest

from omgsim import hilbert
from omgsim.errors import (
    DimensionMismatch,
    DomainError,
    NonHermitianError,
    TruncationError,
)
from omgsim.hilbert import (
    FockSpace,
    SpinMotionState,
    displacement_operator,
    embed,
    expectation,
    lowering_operator,
    matrix_exponential,
    number_operator,
    position_operator,
    sigma_x,
    thermal_state,
)

from conftest import random_state

FOCK = FockSpace(7, 2 * np.pi * 10e3)


class TestFockSpace:
    def test_dimensions(self):
        assert FOCK.dim == 8
        assert FOCK.composite_dim == 16

    @pytest.mark.parametrize("n_max,omega", [(0, 1.0), (-1, 1.0), (3, 0.0), (3, -2.0)])
    def test_invalid(self, n_max, omega):
        with pytest.raises(DomainError):
            FockSpace(n_max, omega)

    def test_commutator_truncation(self):
        # [a, a+] = 1 except in the very last Fock level, where it is -n_max.
        a = lowering_operator(FOCK).matrix
        comm = a @ a.conj().T - a.conj().T @ a
        np.testing.assert_allclose(comm[:-1, :-1], np.eye(FOCK.dim - 1), atol=1e-12)
        assert comm[-1, -1] == pytest.approx(-FOCK.n_max)


class TestThermalState:
    def test_zero_temperature(self):
        state = thermal_state(FOCK, 0.0, "g")
        expected = np.zeros((16, 16))
        expected[0, 0] = 1.0
        np.testing.assert_allclose(state.rho, expected, atol=1e-15)

    def test_geometric_populations(self):
        state = thermal_state(FOCK, 0.05, "g")
        p = state.motional_populations()
        assert p[1] / p[0] == pytest.approx(0.05 / 1.05, abs=1e-12)
        assert p[0] == pytest.approx(1 / 1.05, rel=1e-3)  # small renormalization shift
        assert p.sum() == pytest.approx(1.0, abs=1e-14)

    def test_truncation_error(self):
        with pytest.raises(TruncationError):
            thermal_state(FOCK, 1.6)

    def test_negative_nbar(self):
        with pytest.raises(DomainError):
            thermal_state(FOCK, -0.1)

    def test_orbital_part(self):
        state = thermal_state(FOCK, 0.1, "m")
        p_g, p_m = state.orbital_populations()
        assert p_g == pytest.approx(0.0, abs=1e-15)
        assert p_m == pytest.approx(1.0, abs=1e-15)


class TestExpectation:
    def test_ground_number(self):
        state = thermal_state(FOCK, 0.0)
        assert expectation(state, number_operator(FOCK)) == pytest.approx(0.0, abs=1e-15)

    def test_thermal_number(self):
        fock = FockSpace(40, FOCK.trap_frequency)
        state = thermal_state(fock, 0.5)
        n = expectation(state, number_operator(fock)).real
        assert n == pytest.approx(0.5, abs=1e-6)

    def test_coherent_position(self):
        fock = FockSpace(30, FOCK.trap_frequency)
        d = displacement_operator(fock, 1.0).matrix
        ground = thermal_state(fock, 0.0).rho
        u = np.kron(np.eye(2), d)
        state = SpinMotionState(u @ ground @ u.conj().T, fock)
        x = expectation(state, position_operator(fock)).real
        assert x == pytest.approx(np.sqrt(2), abs=1e-9)

    def test_dimension_mismatch(self):
        state = thermal_state(FOCK, 0.0)
        with pytest.raises(DimensionMismatch):
            expectation(state, np.eye(5))

    def test_hermitian_gives_real(self, rng):
        state = random_state(FOCK, rng)
        val = expectation(state, embed(number_operator(FOCK), FOCK))
        assert abs(val.imag) < 1e-10


class TestMatrixExponential:
    def test_zero_generator(self):
        u = matrix_exponential(np.zeros((4, 4)), 1.0)
        np.testing.assert_allclose(u, np.eye(4), atol=1e-15)

    def test_resonant_pi_pulse(self):
        omega = 2 * np.pi * 50e3
        h = (omega / 2) * sigma_x().matrix
        u = matrix_exponential(h, np.pi / omega)
        np.testing.assert_allclose(u, -1j * sigma_x().matrix, atol=1e-12)
        assert abs(u[1, 0]) ** 2 == pytest.approx(1.0, abs=1e-12)

    def test_trap_period(self):
        h = FOCK.trap_frequency * number_operator(FOCK).matrix
        u = matrix_exponential(h, 2 * np.pi / FOCK.trap_frequency)
        np.testing.assert_allclose(u, np.eye(FOCK.dim), atol=1e-9)

    def test_unitarity(self, rng):
        a = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
        h = a + a.conj().T
        u = matrix_exponential(h, 0.37)
        np.testing.assert_allclose(u @ u.conj().T, np.eye(12), atol=1e-9)

    def test_non_hermitian_rejected(self):
        with pytest.raises(NonHermitianError):
            matrix_exponential(np.array([[0.0, 1.0], [0.0, 0.0]]), 1.0)


class TestStateInvariants:
    def test_constructor_checks(self):
        rho = np.eye(16, dtype=complex) / 16
        rho[0, 1] = 0.5  # not Hermitian
        with pytest.raises(DomainError):
            SpinMotionState(rho, FOCK)
        with pytest.raises(DomainError):
            SpinMotionState(np.eye(16) / 8.0, FOCK)  # trace 2

    def test_purity_preserved_by_unitary(self, rng):
        state = random_state(FOCK, rng)
        h = FOCK.trap_frequency * embed(number_operator(FOCK), FOCK).matrix
        u = matrix_exponential(h, 1e-5)
        evolved = SpinMotionState(u @ state.rho @ u.conj().T, FOCK)
        assert evolved.purity() == pytest.approx(state.purity(), abs=1e-9)

    def test_partial_traces_consistent(self, rng):
        state = random_state(FOCK, rng)
        assert np.trace(state.reduced_orbital()).real == pytest.approx(1.0, abs=1e-12)
        assert np.trace(state.reduced_motional()).real == pytest.approx(1.0, abs=1e-12)
        p_g, p_m = state.orbital_populations()
        assert p_g + p_m == pytest.approx(1.0, abs=1e-12)

    def test_clamp_positive(self):
        rho = np.diag(np.concatenate([[1.0 + 5e-11], np.zeros(14), [-5e-11]])).astype(complex)
        state = SpinMotionState(rho, FOCK)
        with pytest.warns(UserWarning):
            repaired = state.clamp_positive()
        assert np.linalg.eigvalsh(repaired.rho)[0] >= 0
        assert repaired.rho.trace().real == pytest.approx(1.0, abs=1e-14)
