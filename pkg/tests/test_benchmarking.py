import numpy as np
import pytest

from omgsim import benchmarking as rb
from omgsim.benchmarking import (
    DEFAULT_DEPTHS,
    NativeGateSet,
    NoiseModel,
    compile_clifford_table,
    fit_rb_decay,
    generate_rb_sequences,
    optical_rb_params,
    simulate_rb_nuclear,
    simulate_rb_optical,
)
from omgsim.errors import DomainError

TABLE = compile_clifford_table(NativeGateSet("nuclear"))
OPTICAL_TABLE = compile_clifford_table(NativeGateSet("optical"))

SMALL_DEPTHS = (1, 2, 4, 8, 16, 32, 64)


class TestCliffordTable:
    def test_group_size(self):
        assert len(TABLE) == 24

    def test_identity_word_empty(self):
        assert TABLE.words[TABLE.identity_index] == ()

    def test_mean_gate_counts(self):
        # Compiled words are shortest possible; only the physical-pulse count
        # matters for the optical set where Z is a virtual phase jump.
        assert OPTICAL_TABLE.mean_x_gates == pytest.approx(1.75, abs=0.1)
        assert TABLE.mean_native_gates == pytest.approx(74 / 24, abs=1e-12)

    def test_closure(self):
        for i in range(24):
            for j in range(24):
                assert 0 <= TABLE.compose(i, j) < 24

    def test_inverses(self):
        for i in range(24):
            assert TABLE.compose(i, TABLE.inverse_of(i)) == TABLE.identity_index

    def test_words_realize_their_unitaries(self):
        gens = {"X": rb._X90, "Z": rb._Z90}
        for word, u in zip(TABLE.words, TABLE.unitaries):
            v = np.eye(2, dtype=complex)
            for letter in word:
                v = gens[letter] @ v
            assert rb._canonical_key(v) == rb._canonical_key(u)


class TestSequenceGeneration:
    def test_deterministic_under_seed(self):
        a = generate_rb_sequences([1, 4], 3, rng_seed=5)
        b = generate_rb_sequences([1, 4], 3, rng_seed=5)
        assert a == b
        c = generate_rb_sequences([1, 4], 3, rng_seed=6)
        assert a != c

    def test_depth_zero_is_identity_or_flip(self):
        circuits = generate_rb_sequences([0], 8, rng_seed=2)
        for c in circuits:
            expected = TABLE.identity_index if c.target == 0 else TABLE.x_pi_index
            assert c.inversion == expected

    def test_inversion_hits_target(self):
        # Brute-force matrix product over every circuit.
        circuits = generate_rb_sequences([1, 2, 5, 9], 25, rng_seed=11)
        for c in circuits:
            u = np.eye(2, dtype=complex)
            for idx in c.all_cliffords():
                u = TABLE.unitaries[idx] @ u
            assert abs(u[c.target, 0]) ** 2 == pytest.approx(1.0, abs=1e-12)

    def test_validation(self):
        with pytest.raises(DomainError):
            generate_rb_sequences([], 3, rng_seed=0)
        with pytest.raises(DomainError):
            generate_rb_sequences([1], 0, rng_seed=0)


class TestFit:
    def test_exact_recovery(self):
        m = np.array([0, 1, 2, 4, 8, 16, 32, 64, 128, 256], dtype=float)
        y = 0.5 * 0.99**m + 0.5
        a, p, b, r, _, _ = fit_rb_decay(m, y)
        assert a == pytest.approx(0.5, abs=1e-9)
        assert p == pytest.approx(0.99, abs=1e-9)
        assert b == pytest.approx(0.5, abs=1e-9)

    def test_flat_data(self):
        m = np.array([1, 2, 4, 8])
        a, p, b, r, _, _ = fit_rb_decay(m, np.ones(4))
        assert p == 1.0
        assert r == 0.0

    def test_self_consistency_with_noise(self, rng):
        m = np.array(DEFAULT_DEPTHS, dtype=float)
        p_true = 0.995
        probs = 0.5 * p_true**m + 0.5
        shots = 4000
        noisy = rng.binomial(shots, probs) / shots
        w = shots / (probs * (1 - probs) + 1e-6)
        a, p, b, r, p_sigma, _ = fit_rb_decay(m, noisy, w, fix_offset=0.5)
        assert abs(r - (1 - p_true) / 2) < 2 * (p_sigma / 2 + 1e-5)

    def test_needs_three_depths(self):
        with pytest.raises(DomainError):
            fit_rb_decay([1, 2], [1.0, 0.9])


class TestNuclearRB:
    def test_noiseless_is_flat(self):
        circuits = generate_rb_sequences(SMALL_DEPTHS, 8, rng_seed=3)
        noise = NoiseModel(intensity_rms=0, site_offset=0, theta_x_deg=0, scatter_rate=0)
        res = simulate_rb_nuclear(circuits, noise, shots=50)
        assert res.error_per_clifford < 1e-6

    def test_monotone_in_noise_strengths(self):
        circuits = generate_rb_sequences((4, 16, 64, 256), 16, rng_seed=9)

        def r_for(**kw):
            base = dict(intensity_rms=0, site_offset=0, theta_x_deg=0, scatter_rate=0, rng_seed=1)
            base.update(kw)
            return simulate_rb_nuclear(circuits, NoiseModel(**base), shots=150).error_per_clifford

        for key, values in (
            ("intensity_rms", (0.004, 0.012, 0.03)),
            ("theta_x_deg", (0.5, 1.5, 4.0)),
            ("scatter_rate", (2.0, 20.0, 100.0)),
        ):
            rs = [r_for(**{key: v}) for v in values]
            assert rs[0] <= rs[1] <= rs[2], (key, rs)

    def test_depth_reordering_invariance(self):
        noise = NoiseModel(rng_seed=4)
        a = simulate_rb_nuclear(generate_rb_sequences((4, 16, 64), 12, rng_seed=2), noise, shots=80)
        b = simulate_rb_nuclear(generate_rb_sequences((64, 4, 16), 12, rng_seed=2), noise, shots=80)
        # Same per-depth statistics up to which circuits got drawn per depth;
        # the extracted r agrees within its own uncertainty.
        assert abs(a.error_per_clifford - b.error_per_clifford) < 4 * (
            a.error_sigma + b.error_sigma + 1e-6
        )

    def test_leakage_lowers_asymptote(self):
        circuits = generate_rb_sequences((2, 16, 128), 10, rng_seed=8)
        noise = NoiseModel(scatter_rate=400.0, leakage_fraction=0.5, rng_seed=5)
        res = simulate_rb_nuclear(circuits, noise, shots=200)
        assert res.offset < 0.5


class TestOpticalRB:
    def test_eta_zero_flat(self):
        circuits = generate_rb_sequences(SMALL_DEPTHS, 6, rng_seed=3, kind="optical")
        params = optical_rb_params(0.05, recoil_projection=0.0)
        res = simulate_rb_optical(circuits, params, 0.05, shots=50, rng_seed=1)
        assert res.error_per_clifford < 1e-6

    def test_depth_zero_success_is_unity(self):
        circuits = generate_rb_sequences([0], 5, rng_seed=3, kind="optical", randomize_target=False)
        params = optical_rb_params(0.05)
        res = simulate_rb_optical(circuits + generate_rb_sequences((1, 2), 5, rng_seed=4, kind="optical"),
                                  params, 0.05, shots=50, rng_seed=1)
        d0 = np.where(res.depths == 0)[0][0]
        assert res.success_prob[d0] == pytest.approx(1.0, abs=1e-9)

    def test_reports_motional_bookkeeping(self):
        circuits = generate_rb_sequences((1, 4, 16), 8, rng_seed=6, kind="optical")
        params = optical_rb_params(0.05)
        res = simulate_rb_optical(circuits, params, 0.05, shots=60, rng_seed=2)
        assert res.final_nbar is not None and res.final_nbar > 0.05
        assert res.max_top_level is not None and res.max_top_level < 5e-3

    def test_n_max_rule(self):
        assert rb.default_optical_n_max(0.4) == 11
        assert rb.default_optical_n_max(0.2) == 7
        assert rb.default_optical_n_max(0.05) == 7


class TestNoiseModelValidation:
    def test_ranges(self):
        with pytest.raises(DomainError):
            NoiseModel(intensity_rms=-0.1)
        with pytest.raises(DomainError):
            NoiseModel(theta_x_deg=15.0)
        with pytest.raises(DomainError):
            NativeGateSet("nuclear", gate_duration=0.0)
        with pytest.raises(DomainError):
            NativeGateSet("banana")
