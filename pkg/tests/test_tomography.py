import json

import numpy as np
import pytest

from omgsim import tomography as tg
from omgsim.errors import DomainError, IncompleteDataError
from omgsim.tomography import (
    FidelityReport,
    ProcessMatrix,
    TomographyDataset,
    average_fidelity,
    channel_probabilities,
    chi_to_choi,
    choi_to_chi,
    default_input_states,
    depolarizing_choi,
    ideal_mcm_process,
    loss_scaled_fidelity,
    pauli_effects,
    process_fidelity,
    reconstruct_process,
    rotation_x,
    rotation_y,
    rotation_z,
    simulate_dataset,
    unitary_choi,
)

CHI_IDENTITY = choi_to_chi(unitary_choi(np.eye(2)))


def random_cptp_choi(rng, kraus_rank=4):
    """Random channel from a Haar-ish random Stinespring isometry."""
    g = rng.normal(size=(2 * kraus_rank, 2)) + 1j * rng.normal(size=(2 * kraus_rank, 2))
    q, _ = np.linalg.qr(g)
    kraus = [q[2 * k : 2 * k + 2, :].conj().T.conj() for k in range(kraus_rank)]
    kraus = [q[2 * k : 2 * k + 2, :] for k in range(kraus_rank)]
    choi = np.zeros((4, 4), dtype=complex)
    eye = np.eye(2)
    for i in range(2):
        for j in range(2):
            ketbra = np.outer(eye[i], eye[j])
            out = sum(k @ ketbra @ k.conj().T for k in kraus)
            choi += np.kron(ketbra, out)
    return choi


class TestChiConversion:
    def test_identity(self):
        chi = choi_to_chi(unitary_choi(np.eye(2)))
        np.testing.assert_allclose(chi, np.diag([1, 0, 0, 0]), atol=1e-14)

    def test_x_flip(self):
        chi = choi_to_chi(unitary_choi(rotation_x(np.pi)))
        np.testing.assert_allclose(chi, np.diag([0, 1, 0, 0]), atol=1e-14)

    def test_depolarizing_kraus_diagonal(self):
        p = 0.1
        chi = choi_to_chi(depolarizing_choi(p))
        np.testing.assert_allclose(chi, np.diag([1 - 3 * p / 4, p / 4, p / 4, p / 4]), atol=1e-14)

    def test_round_trip(self, rng):
        for _ in range(5):
            choi = random_cptp_choi(rng)
            np.testing.assert_allclose(chi_to_choi(choi_to_chi(choi)), choi, atol=1e-12)

    def test_tp_means_unit_chi_trace(self, rng):
        chi = choi_to_chi(random_cptp_choi(rng))
        assert np.trace(chi).real == pytest.approx(1.0, abs=1e-12)


class TestReconstruction:
    def test_identity_infinite_statistics(self):
        p = channel_probabilities(unitary_choi(np.eye(2)), default_input_states(), pauli_effects())
        data = TomographyDataset(default_input_states(), pauli_effects(), p * 1e9)
        proc, trace = reconstruct_process(data, tol=1e-13)
        np.testing.assert_allclose(proc.choi, unitary_choi(np.eye(2)), atol=1e-6)

    def test_depolarizing_fidelity(self):
        p = channel_probabilities(depolarizing_choi(0.1), default_input_states(), pauli_effects())
        data = TomographyDataset(default_input_states(), pauli_effects(), p * 1e9)
        proc, _ = reconstruct_process(data, max_iter=20000, tol=1e-14)
        assert process_fidelity(proc.chi, CHI_IDENTITY) == pytest.approx(0.925, abs=1e-3)

    def test_finite_statistics_identity(self, rng):
        data = simulate_dataset(unitary_choi(np.eye(2)), 10000, rng)
        proc, trace = reconstruct_process(data)
        assert process_fidelity(proc.chi, CHI_IDENTITY) > 0.995
        assert np.all(np.diff(trace) >= -1e-12)

    def test_loglik_monotone_on_random_finite_data(self, rng):
        for _ in range(20):
            choi = random_cptp_choi(rng)
            data = simulate_dataset(choi, 500, rng)
            _, trace = reconstruct_process(data, max_iter=2000)
            assert np.all(np.diff(trace) >= -1e-12)

    def test_random_channel_recovery(self, rng):
        # Small-instance oracle: infinite statistics pins down the channel.
        for _ in range(20):
            choi = random_cptp_choi(rng)
            p = channel_probabilities(choi, default_input_states(), pauli_effects())
            data = TomographyDataset(default_input_states(), pauli_effects(), p * 1e9)
            proc, _ = reconstruct_process(data, max_iter=60000, tol=1e-15)
            assert np.abs(proc.choi - choi).max() < 1e-4

    def test_reconstruction_is_cptp(self, rng):
        data = simulate_dataset(random_cptp_choi(rng), 200, rng)
        proc, _ = reconstruct_process(data)
        assert np.linalg.eigvalsh(proc.choi)[0] >= -1e-9
        np.testing.assert_allclose(proc.partial_trace_out(), np.eye(2), atol=1e-8)

    def test_permutation_invariance(self, rng):
        inputs = default_input_states()
        effects = pauli_effects()
        p = channel_probabilities(depolarizing_choi(0.2), inputs, effects)
        data = TomographyDataset(inputs, effects, p * 1e8)
        perm = [2, 0, 3, 1]
        data_p = TomographyDataset([inputs[i] for i in perm], effects, p[perm] * 1e8)
        a, _ = reconstruct_process(data, tol=1e-13)
        b, _ = reconstruct_process(data_p, tol=1e-13)
        np.testing.assert_allclose(a.choi, b.choi, atol=1e-6)

    def test_incomplete_data_rejected(self):
        inputs = [np.array([1, 0], dtype=complex)] * 4
        p = channel_probabilities(unitary_choi(np.eye(2)), inputs, pauli_effects())
        with pytest.raises(IncompleteDataError):
            reconstruct_process(TomographyDataset(inputs, pauli_effects(), p * 100))

    def test_empty_setting_dropped(self, rng):
        data = simulate_dataset(unitary_choi(np.eye(2)), 1000, rng)
        counts = data.counts.copy()
        counts = np.vstack([counts, np.zeros(len(data.effects))])
        inputs = data.input_states + [np.array([0, 1], dtype=complex)]
        padded = TomographyDataset(inputs, data.effects, counts)
        with pytest.warns(UserWarning):
            proc, _ = reconstruct_process(padded)
        assert process_fidelity(proc.chi, CHI_IDENTITY) > 0.99


class TestFidelities:
    def test_unitary_self_fidelity(self):
        chi = choi_to_chi(unitary_choi(rotation_y(np.pi)))
        assert process_fidelity(chi, chi) == pytest.approx(1.0, abs=1e-12)
        assert average_fidelity(1.0) == pytest.approx(1.0)

    def test_reported_chain(self):
        assert average_fidelity(0.972) == pytest.approx(0.981, abs=5e-4)

    def test_average_fidelity_identity_relation(self, rng):
        for _ in range(5):
            f_p = rng.uniform(0, 1)
            f_av = average_fidelity(f_p)
            assert f_av == pytest.approx((2 * f_p + 1) / 3, abs=1e-15)

    def test_loss_scaling(self):
        assert loss_scaled_fidelity(0.981, 0.9796) == pytest.approx(0.961, abs=5e-4)
        with pytest.raises(DomainError):
            loss_scaled_fidelity(0.9, 1.2)

    def test_basis_independence(self, rng):
        # Conjugating both chi matrices by the same Pauli-frame rotation
        # leaves the overlap unchanged.
        chi_a = choi_to_chi(random_cptp_choi(rng))
        chi_b = choi_to_chi(random_cptp_choi(rng))
        g = rng.normal(size=(4, 4))
        q, _ = np.linalg.qr(g)
        f1 = process_fidelity(chi_a, chi_b)
        f2 = process_fidelity(q.T @ chi_a @ q, q.T @ chi_b @ q)
        assert f1 == pytest.approx(f2, abs=1e-12)


class TestIdealProcess:
    def test_theta_zero_is_x_flip(self):
        proc = ideal_mcm_process(0.0, 0.0)
        np.testing.assert_allclose(proc.choi, unitary_choi(rotation_x(np.pi)), atol=1e-14)

    def test_quarter_turns_give_y_flip(self):
        proc = ideal_mcm_process(np.pi / 2, -np.pi / 2)
        u = rotation_z(np.pi / 2) @ rotation_x(np.pi) @ rotation_z(-np.pi / 2)
        ref = rotation_y(np.pi)
        phase = u[np.unravel_index(abs(ref).argmax(), ref.shape)] / ref[np.unravel_index(abs(ref).argmax(), ref.shape)]
        np.testing.assert_allclose(u, phase * ref, atol=1e-12)
        assert process_fidelity(proc.chi, choi_to_chi(unitary_choi(rotation_y(np.pi)))) == pytest.approx(1.0, abs=1e-12)


class TestJsonInterface:
    def test_round_trip(self, rng):
        data = simulate_dataset(depolarizing_choi(0.05), 300, rng, survival=[0.97] * 4)
        doc = json.loads(json.dumps(data.to_json_dict()))
        back = TomographyDataset.from_json_dict(doc)
        np.testing.assert_allclose(back.counts, data.counts)
        np.testing.assert_allclose(back.survival, data.survival)
        for a, b in zip(back.input_states, data.input_states):
            np.testing.assert_allclose(a, b, atol=1e-12)

    def test_bloch_vector_inputs(self):
        data = TomographyDataset(
            [[0, 0, 1], [0, 0, -1], [1, 0, 0], [0, -1, 0]],
            pauli_effects(),
            np.ones((4, 6)),
        )
        np.testing.assert_allclose(data.input_states[0], np.diag([1.0, 0.0]), atol=1e-12)
