import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from qalife import channels, gates, qcore
from qalife.channels import DampingParams, LindbladSpec, apply_damping, lindblad_rk4_evolve
from qalife.qcore import DensityRegister

seeds = st.integers(0, 2**32 - 1)
probs = st.floats(0.0, 1.0)


def individual(a, b=0.0, c=0.0):
    rho_g = np.array([[a, b - 1j * c], [b + 1j * c, 1 - a]])
    reg = DensityRegister(np.kron(rho_g, oracles.P0))
    return qcore.apply_unitary(reg, gates.cnot(), [0, 1])


class TestDampingParams:
    def test_probability(self):
        assert DampingParams(2.0, 0.5).p == pytest.approx(1 - math.exp(-1.0), abs=1e-15)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            DampingParams(-1.0, 1.0)
        with pytest.raises(ValueError):
            DampingParams(1.0, -0.1)


class TestApplyDamping:
    def test_matches_closed_form_register(self):
        a, b, c, gt = 0.6, 0.3, 0.2, 0.7
        out = apply_damping(individual(a, b, c), 1, DampingParams(1.0, gt))
        np.testing.assert_allclose(out.matrix, oracles.individual_matrix(a, b, c, gt), atol=1e-12, rtol=0)

    def test_zero_duration_is_identity(self, rng):
        reg = DensityRegister(qcore.random_density_matrix(2, rng))
        np.testing.assert_array_equal(apply_damping(reg, 0, DampingParams(1.0, 0.0)).matrix, reg.matrix)

    def test_full_decay_reaches_dark_state(self):
        out = channels.damp_matrix(oracles.P1, 0, 1, 1.0)
        np.testing.assert_allclose(out, oracles.P0, atol=0)

    @pytest.mark.parametrize("target", [0, 1, 2])
    def test_matches_kraus_oracle(self, target, rng):
        rho = qcore.random_density_matrix(3, rng)
        np.testing.assert_allclose(channels.damp_matrix(rho, target, 3, 0.37), oracles.damp(rho, target, 3, 0.37),
                                   atol=1e-14)

    def test_kraus_completeness(self):
        k0, k1 = channels.kraus_operators(0.42)
        np.testing.assert_allclose(k0.conj().T @ k0 + k1.conj().T @ k1, np.eye(2), atol=1e-15)

    def test_rejects_bad_target(self):
        with pytest.raises(ValueError):
            apply_damping(DensityRegister.ground(2), 2, DampingParams(1.0, 1.0))

    @settings(max_examples=40, deadline=None)
    @given(seeds, probs)
    def test_preserves_trace_and_hermiticity(self, seed, p):
        rho = qcore.random_density_matrix(3, np.random.default_rng(seed))
        out = DensityRegister(channels.damp_matrix(rho, seed % 3, 3, p))
        diag = qcore.validate(out, check_psd=True)
        assert diag.trace_defect <= 1e-12 and diag.hermiticity_defect <= 1e-12
        assert diag.min_eigenvalue >= -1e-12

    @settings(max_examples=30, deadline=None)
    @given(seeds, probs)
    def test_leaves_other_qubits_alone(self, seed, p):
        reg = DensityRegister(qcore.random_density_matrix(3, np.random.default_rng(seed)))
        out = DensityRegister(channels.damp_matrix(reg.matrix, 1, 3, p))
        np.testing.assert_allclose(qcore.partial_trace(out, [0, 2]), qcore.partial_trace(reg, [0, 2]), atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(seeds, st.floats(0.0, 3.0), st.floats(0.0, 3.0))
    def test_semigroup(self, seed, t1, t2):
        rho = qcore.random_density_matrix(2, np.random.default_rng(seed))
        p = DampingParams(1.0, t1).p
        q = DampingParams(1.0, t2).p
        staged = channels.damp_matrix(channels.damp_matrix(rho, 0, 2, p), 0, 2, q)
        direct = channels.damp_matrix(rho, 0, 2, DampingParams(1.0, t1 + t2).p)
        np.testing.assert_allclose(staged, direct, atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(seeds, probs, probs)
    def test_different_qubits_commute(self, seed, p, q):
        rho = qcore.random_density_matrix(3, np.random.default_rng(seed))
        one = channels.damp_matrix(channels.damp_matrix(rho, 0, 3, p), 2, 3, q)
        two = channels.damp_matrix(channels.damp_matrix(rho, 2, 3, q), 0, 3, p)
        np.testing.assert_allclose(one, two, atol=1e-12)

    @pytest.mark.parametrize("p", [0.0, 0.1, 0.5, 0.9])
    def test_coherence_witness_scaling(self, p):
        bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
        plus = np.array([1, 1]) / np.sqrt(2)
        rho = np.kron(np.outer(bell, bell), np.outer(plus, plus)).astype(complex)
        xxx = oracles.kron_all(oracles.X, oracles.X, oracles.X)
        out = oracles.damp(rho, 1, 3, p)
        assert oracles.expectation(out, xxx) == pytest.approx(math.sqrt(1 - p), abs=1e-12)
        reg = DensityRegister(channels.damp_matrix(rho, 1, 3, p))
        assert qcore.sigma_x_all(reg) == pytest.approx(math.sqrt(1 - p), abs=1e-12)


class TestClosedForms:
    def test_half_life(self):
        assert channels.phenotype_decay_closed_form(0.9, 1.0, math.log(2)) == pytest.approx(0.9, abs=1e-12)

    def test_dark_genotype(self):
        assert channels.phenotype_decay_closed_form(1.0, 1.0, 3.0) == 1.0

    def test_birth_value(self):
        assert channels.phenotype_decay_closed_form(0.3, 1.0, 0.0) == pytest.approx(-0.4, abs=1e-15)

    def test_death_time_value(self):
        assert channels.death_time(0.5, 1.0, 0.01) == pytest.approx(math.log(100), abs=1e-12)
        assert channels.death_time(0.5, 1.0, 0.01) == pytest.approx(4.605170185988092, abs=1e-12)

    def test_born_dead(self):
        assert channels.death_time(0.996, 1.0, 0.01) == 0.0
        assert channels.death_time(1.0, 1.0, 0.01) == 0.0

    def test_inverse_gamma_scaling(self):
        assert channels.death_time(0.2, 2.0, 0.01) == pytest.approx(channels.death_time(0.2, 1.0, 0.01) / 2)

    def test_undamped_lives_forever(self):
        assert channels.death_time(0.2, 0.0, 0.01) == math.inf

    def test_death_time_reaches_threshold(self):
        a, gamma, eps = 0.37, 1.3, 0.02
        t = channels.death_time(a, gamma, eps)
        assert channels.phenotype_decay_closed_form(a, gamma, t) == pytest.approx(1 - eps, abs=1e-12)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            channels.death_time(1.2, 1.0, 0.01)
        with pytest.raises(ValueError):
            channels.death_time(0.5, 1.0, 0.0)


class TestRk4Oracle:
    def test_agrees_with_exact_channel(self, rng):
        for _ in range(5):
            reg = DensityRegister(qcore.random_density_matrix(2, rng))
            exact = apply_damping(reg, 1, DampingParams(1.0, 1.0))
            numeric = lindblad_rk4_evolve(reg, LindbladSpec((1,), 1.0), 1.0, 1e-3)
            assert np.max(np.abs(exact.matrix - numeric.matrix)) <= 1e-6

    def test_long_time_limit_is_dark_state(self, rng):
        reg = DensityRegister(qcore.random_density_matrix(2, rng))
        out = lindblad_rk4_evolve(reg, LindbladSpec((0,), 1.0), 40.0, 2e-2)
        np.testing.assert_allclose(qcore.partial_trace(out, [0]), oracles.P0, atol=1e-6)

    def test_zero_duration(self, rng):
        reg = DensityRegister(qcore.random_density_matrix(2, rng))
        out = lindblad_rk4_evolve(reg, LindbladSpec((0,), 1.0), 0.0, 1e-3)
        np.testing.assert_array_equal(out.matrix, reg.matrix)

    def test_two_targets_match_sequential_exact(self, rng):
        reg = DensityRegister(qcore.random_density_matrix(3, rng))
        numeric = lindblad_rk4_evolve(reg, LindbladSpec((0, 2), 0.8), 1.0, 1e-3)
        params = DampingParams(0.8, 1.0)
        exact = apply_damping(apply_damping(reg, 0, params), 2, params)
        assert np.max(np.abs(exact.matrix - numeric.matrix)) <= 1e-6

    def test_rejects_bad_step(self):
        with pytest.raises(ValueError):
            lindblad_rk4_evolve(DensityRegister.ground(1), LindbladSpec((0,), 1.0), 1.0, 0.0)
