import numpy as np
import pytest

from omgsim import drive, hilbert, shelving
from omgsim.drive import DriveParams, mpp, pi_pulse, sequence_for_label
from omgsim.errors import DomainError
from omgsim.hilbert import FockSpace, SpinMotionState, thermal_state
from omgsim.shelving import (
    LightShiftConfig,
    ShelvingConfig,
    dephase_motional,
    heating_experiment_config,
    light_shift_heating,
    shelving_error,
    shelving_experiment_params,
    suppression_error,
)

from conftest import random_state

TAU = 2 * np.pi


class TestDephaseMotional:
    def test_product_diagonal_state_unchanged(self):
        fock = FockSpace(5, TAU * 10e3)
        state = thermal_state(fock, 0.2, "g")
        out = dephase_motional(state)
        np.testing.assert_allclose(out.rho, state.rho, atol=1e-14)

    def test_idempotent(self, rng):
        fock = FockSpace(6, TAU * 10e3)
        for _ in range(10):
            state = random_state(fock, rng)
            once = dephase_motional(state)
            twice = dephase_motional(once)
            np.testing.assert_allclose(twice.rho, once.rho, atol=1e-14)

    def test_preserves_trace_nbar_orbital(self, rng):
        fock = FockSpace(6, TAU * 10e3)
        for _ in range(10):
            state = random_state(fock, rng)
            out = dephase_motional(state)
            assert out.rho.trace().real == pytest.approx(1.0, abs=1e-12)
            assert out.nbar == pytest.approx(state.nbar, abs=1e-12)
            np.testing.assert_allclose(
                out.orbital_populations(), state.orbital_populations(), atol=1e-12
            )

    def test_entangled_state_becomes_product_of_marginals(self):
        # Bell-like |g,0> + |m,1> superposition.
        fock = FockSpace(3, TAU * 10e3)
        psi = np.zeros(fock.composite_dim, dtype=complex)
        psi[0] = 1 / np.sqrt(2)          # |g,0>
        psi[fock.dim + 1] = 1 / np.sqrt(2)  # |m,1>
        state = SpinMotionState(np.outer(psi, psi.conj()), fock)
        out = dephase_motional(state)
        # Brute-force marginals of the input.
        rho_orb = state.reduced_orbital()
        p_mot = np.diag(state.reduced_motional()).real
        expected = np.kron(rho_orb, np.diag(p_mot))
        np.testing.assert_allclose(out.rho, expected, atol=1e-14)
        assert abs(out.rho[1, fock.dim]) < 1e-14  # coherence removed


class TestShelvingError:
    def test_eta_zero_is_errorless(self):
        fock = FockSpace(5, TAU * 10e3)
        params = DriveParams(fock, rabi=TAU * 80e3, lamb_dicke=0.0)
        cfg = ShelvingConfig(pi_pulse(), params, n_shelves=6)
        res = shelving_error(cfg)
        assert res.error_per_shelve == pytest.approx(0.0, abs=1e-12)
        assert res.dnbar_per_shelve == pytest.approx(0.0, abs=1e-12)

    def test_heating_defaults_match_measured_rates(self):
        res_pi = shelving_error(heating_experiment_config("pi"))
        res_mpp = shelving_error(heating_experiment_config("mpp"))
        assert 0.07 <= res_pi.dnbar_per_shelve <= 0.11
        assert 0.002 <= res_mpp.dnbar_per_shelve <= 0.008

    def test_error_ratio_at_operating_point(self):
        # At the analysis operating point the composite pulse beats the plain
        # pi-pulse by far more than the conservative 20x bound.
        params = shelving_experiment_params(
            trap_frequency=TAU * 10e3, rabi=TAU * 80e3, recoil_projection=1.0, n_max=25
        )
        eps = {}
        for label in ("pi", "mpp"):
            cfg = ShelvingConfig(sequence_for_label(label), params, n_shelves=10)
            eps[label] = shelving_error(cfg).error_per_shelve
        assert eps["pi"] >= 20 * eps["mpp"]

    def test_coherent_echo_reduces_heating(self):
        params = shelving_experiment_params()
        period = TAU / params.fock.trap_frequency
        dephased = shelving_error(ShelvingConfig(pi_pulse(), params, n_shelves=10))
        echoed = shelving_error(
            ShelvingConfig(
                pi_pulse(), params, n_shelves=10, dephase_between=False, wait_time=period
            )
        )
        assert echoed.dnbar_per_shelve < 0.5 * dephased.dnbar_per_shelve

    def test_invalid_config(self):
        params = shelving_experiment_params()
        with pytest.raises(DomainError):
            ShelvingConfig(pi_pulse(), params, n_shelves=0)
        with pytest.raises(DomainError):
            ShelvingConfig(pi_pulse(), params, wait_time=-1.0)


class TestSuppression:
    def test_zero_shift_envelope(self):
        params = shelving_experiment_params()
        res = suppression_error(params, 0.0, mpp())
        assert res.lorentzian_envelope == pytest.approx(1.0)
        assert res.simulated == pytest.approx(1.0, abs=0.05)

    def test_shift_equal_rabi(self):
        params = shelving_experiment_params()
        res = suppression_error(params, params.rabi, mpp())
        assert res.lorentzian_envelope == pytest.approx(0.5)

    def test_three_mhz_shift(self):
        params = shelving_experiment_params(trap_frequency=TAU * 10e3, rabi=TAU * 80e3)
        res = suppression_error(params, TAU * 3e6, mpp())
        assert res.lorentzian_envelope == pytest.approx(7.1e-4, abs=0.05e-4)
        # Far off resonance the full simulation follows the envelope's scale.
        assert res.simulated < 10 * res.lorentzian_envelope


class TestLightShiftHeating:
    def test_zero_ops(self):
        assert light_shift_heating(0) == 0.0

    def test_default_rate(self):
        assert light_shift_heating(10) == pytest.approx(0.56)

    def test_custom_rate(self):
        cfg = LightShiftConfig(heating_per_op=0.06)
        assert light_shift_heating(1, cfg) == pytest.approx(0.06)

    def test_validation(self):
        with pytest.raises(DomainError):
            LightShiftConfig(ramp_duration=-1.0)
        with pytest.raises(DomainError):
            LightShiftConfig(ramp_profile="squiggle")
        with pytest.raises(DomainError):
            light_shift_heating(-1)
