import math

import numpy as np
import pytest

import oracles
from qalife import channels, qcore
from qalife.ecosystem import (
    Dynamics, ForcedEvent, GridSpec, PreconditionError, RegionParams, World,
)
from qalife.qcore import CapacityError

QUIET = RegionParams(mutation_rate=0.0, replication_prob=0.0, gamma=1.0, copy_error_prob=0.0)
STILL = (1.0, 0.0, 0.0, 0.0, 0.0)


def quiet_world(rows=1, cols=1, seed=0, region=QUIET, **dyn):
    dyn.setdefault("move_probs", STILL)
    return World(GridSpec.uniform(rows, cols, region), Dynamics(**dyn), seed)


def sz(world, ind):
    return world.genotype_sigma_z(ind), world.phenotype_sigma_z(ind)


class TestSpawn:
    def test_classical_founder(self):
        w = quiet_world()
        ind = w.spawn_primordial((0.9, 0, 0), (0, 0))
        np.testing.assert_allclose(sz(w, ind), (0.8, 0.8), atol=1e-12)

    def test_register_matches_closed_form(self):
        w = quiet_world()
        w.spawn_primordial((0.6, 0.3, 0.2), (0, 0))
        np.testing.assert_allclose(w.register.matrix, oracles.individual_matrix(0.6, 0.3, 0.2, 0.0), atol=1e-15)

    def test_coherent_founder_is_bell_state(self):
        w = quiet_world()
        w.spawn_primordial((0.5, 0.5, 0.0), (0, 0))
        xx = oracles.expectation(w.register.matrix, np.kron(oracles.X, oracles.X))
        assert xx == pytest.approx(1.0, abs=1e-12)

    def test_dark_genotype_dies_at_first_check(self):
        w = quiet_world()
        ind = w.spawn_primordial((1.0, 0, 0), (0, 0))
        np.testing.assert_allclose(sz(w, ind), (1.0, 1.0), atol=1e-12)
        assert ind.alive
        w.step()
        assert not ind.alive

    def test_rejects_non_positive_genotype(self):
        with pytest.raises(ValueError):
            quiet_world().spawn_primordial((0.5, 0.5, 0.5), (0, 0))

    def test_rejects_population_out_of_range(self):
        with pytest.raises(ValueError):
            quiet_world().spawn_primordial((1.2, 0, 0), (0, 0))

    def test_cap(self):
        w = quiet_world(qubit_cap=4)
        w.spawn_primordial((0.5, 0, 0), (0, 0))
        w.spawn_primordial((0.5, 0, 0), (0, 0))
        with pytest.raises(CapacityError):
            w.spawn_primordial((0.5, 0, 0), (0, 0))

    def test_age_predamps(self):
        w = quiet_world()
        ind = w.spawn_primordial((0.3, 0, 0), (0, 0), age=0.8)
        assert w.phenotype_sigma_z(ind) == pytest.approx(channels.phenotype_decay_closed_form(0.3, 1.0, 0.8),
                                                         abs=1e-12)
        assert ind.birth_time == pytest.approx(-0.8)


class TestReplication:
    def test_two_generation_expectations(self):
        w = quiet_world()
        parent = w.spawn_primordial((0.9, 0, 0), (0, 0))
        w.advance(1.0)
        child = w.replicate(parent, copy_error=False)
        w.advance(1.0)
        got = [*sz(w, parent), *sz(w, child)]
        expected = [0.8, 1 - 0.2 * math.exp(-2), 0.8, 1 - 0.2 * math.exp(-1)]
        np.testing.assert_allclose(got, expected, atol=1e-10, rtol=0)
        np.testing.assert_allclose(got, [0.8, 0.972933, 0.8, 0.926424], atol=1e-6)

    def test_copy_error_at_half_turn_leaves_ancilla(self):
        w = quiet_world()
        parent = w.spawn_primordial((0.3, 0, 0), (0, 0))
        child = w.replicate(parent, copy_error=True, theta=math.pi)
        np.testing.assert_allclose(sz(w, child), (1.0, 1.0), atol=1e-12)
        assert w.events[-1].params["gate"] == "ImperfectClone"

    def test_child_shares_cell_and_lineage(self):
        w = quiet_world(3, 3)
        parent = w.spawn_primordial((0.3, 0, 0), (2, 1))
        child = w.replicate(parent, copy_error=False)
        assert child.position == (2, 1) and child.lineage == parent.id
        assert w.register.num_qubits == 4

    def test_coherence_propagates(self):
        w = quiet_world()
        parent = w.spawn_primordial((0.5, 0.5, 0), (0, 0))
        w.replicate(parent, copy_error=False)
        assert abs(qcore.sigma_x_all(w.register)) > 0.5

    def test_dead_parent_rejected(self):
        w = quiet_world()
        parent = w.spawn_primordial((1.0, 0, 0), (0, 0))
        w.step()
        with pytest.raises(PreconditionError):
            w.replicate(parent)

    def test_cap_skips_birth(self):
        w = quiet_world(qubit_cap=4)
        parent = w.spawn_primordial((0.3, 0, 0), (0, 0))
        assert w.replicate(parent, copy_error=False) is not None
        assert w.replicate(parent, copy_error=False) is None
        assert w.events[-1].kind == "replication_skipped"
        assert w.register.num_qubits == 4


class TestMutation:
    def test_zero_angle_keeps_classical_genotype(self):
        w = quiet_world()
        ind = w.spawn_primordial((0.9, 0, 0), (0, 0))
        before = w.register.matrix.copy()
        w.mutate(ind, 0.0)
        np.testing.assert_allclose(w.register.matrix, before, atol=1e-15)

    def test_quarter_turn_flips_genotype(self):
        w = quiet_world()
        ind = w.spawn_primordial((0.9, 0, 0), (0, 0))
        w.mutate(ind, math.pi / 2)
        g, p = sz(w, ind)
        assert g == pytest.approx(-0.8, abs=1e-12)
        assert p == pytest.approx(0.8, abs=1e-12)

    def test_phenotype_untouched_for_any_angle(self, rng):
        w = quiet_world()
        ind = w.spawn_primordial((0.4, 0.3, 0.1), (0, 0))
        w.advance(0.3)
        before = qcore.partial_trace(w.register, [ind.phenotype_qubit])
        w.mutate(ind, rng.uniform(0, 2 * math.pi))
        np.testing.assert_allclose(qcore.partial_trace(w.register, [ind.phenotype_qubit]), before, atol=1e-12)

    def test_dead_target_skipped(self):
        w = quiet_world()
        ind = w.spawn_primordial((1.0, 0, 0), (0, 0))
        w.step()
        assert w.mutate(ind, 1.0) is False
        assert w.events[-1].kind == "mutation_skipped"


class TestInteraction:
    def test_opposite_genotypes_swap_phenotypes(self):
        w = quiet_world()
        dark = w.spawn_primordial((1.0, 0, 0), (0, 0), age=0.3)
        bright = w.spawn_primordial((0.0, 0, 0), (0, 0), age=0.7)
        before = [w.phenotype_sigma_z(dark), w.phenotype_sigma_z(bright)]
        w.interact(dark, bright)
        after = [w.phenotype_sigma_z(dark), w.phenotype_sigma_z(bright)]
        np.testing.assert_allclose(after, before[::-1], atol=1e-10)
        assert before[0] != pytest.approx(before[1])

    def test_equal_genotypes_leave_register(self):
        w = quiet_world()
        a = w.spawn_primordial((0.0, 0, 0), (0, 0), age=0.2)
        b = w.spawn_primordial((0.0, 0, 0), (0, 0), age=1.4)
        before = w.register.matrix.copy()
        w.interact(a, b)
        np.testing.assert_allclose(w.register.matrix, before, atol=1e-10)

    def test_interaction_crossing_matches_bruteforce(self):
        w = quiet_world()
        first = w.spawn_primordial((0.8, 0, 0), (0, 0), age=2.0)
        second = w.spawn_primordial((0.2, 0, 0), (0, 0), age=1.0)
        before = [w.phenotype_sigma_z(first), w.phenotype_sigma_z(second)]
        w.interact(first, second)
        rho = np.kron(oracles.individual_matrix(0.8, 0, 0, 2.0), oracles.individual_matrix(0.2, 0, 0, 1.0))
        u = oracles.interaction_permutation()
        out = u @ rho @ u.conj().T
        expected = [oracles.expectation(out, oracles.single(oracles.Z, q, 4)) for q in (1, 3)]
        after = [w.phenotype_sigma_z(first), w.phenotype_sigma_z(second)]
        np.testing.assert_allclose(after, expected, atol=1e-12)
        # the older, short-lived phenotype ends up below the younger one
        assert before[0] > before[1] and after[0] < after[1]

    def test_preconditions(self):
        w = quiet_world(2, 2)
        a = w.spawn_primordial((0.3, 0, 0), (0, 0))
        b = w.spawn_primordial((0.4, 0, 0), (1, 1))
        with pytest.raises(PreconditionError):
            w.interact(a, a)
        with pytest.raises(PreconditionError):
            w.interact(a, b)

    def test_genotype_populations_invariant(self, rng):
        for _ in range(50):
            reg = qcore.DensityRegister(qcore.random_density_matrix(4, rng, rank=2))
            out = qcore.apply_unitary(reg, oracles.interaction_permutation(), [0, 1, 2, 3])
            np.testing.assert_allclose(np.diag(qcore.partial_trace(out, [0, 2])),
                                       np.diag(qcore.partial_trace(reg, [0, 2])), atol=1e-10)
            for q in (0, 2):
                assert qcore.z_expectation(out, q) == pytest.approx(qcore.z_expectation(reg, q), abs=1e-10)

    def test_genotype_coherence_feels_the_swap(self):
        # g1 in |+>, p1 = |0>, g2 = |0>, p2 = |1>: only the g1=1 branch swaps
        plus = np.array([1, 1]) / np.sqrt(2)
        psi = oracles.kron_all(plus[:, None], [[1], [0]], [[1], [0]], [[0], [1]])[:, 0]
        reg = qcore.DensityRegister(np.outer(psi, psi.conj()))
        out = qcore.apply_unitary(reg, oracles.interaction_permutation(), [0, 1, 2, 3])
        np.testing.assert_allclose(qcore.partial_trace(reg, [0]), np.full((2, 2), 0.5), atol=1e-15)
        np.testing.assert_allclose(qcore.partial_trace(out, [0]), np.eye(2) / 2, atol=1e-15)

    def test_model_states_keep_genotype_marginals(self, rng):
        for _ in range(10):
            w = quiet_world()
            a1, a2 = rng.uniform(0.05, 0.95, size=2)
            first = w.spawn_primordial((a1, 0.9 * math.sqrt(a1 * (1 - a1)), 0), (0, 0), age=rng.uniform(0, 2))
            second = w.spawn_primordial((a2, 0, 0.9 * math.sqrt(a2 * (1 - a2))), (0, 0), age=rng.uniform(0, 2))
            before = [qcore.partial_trace(w.register, [q]) for q in (0, 2)]
            w.interact(first, second)
            for q, ref in zip((0, 2), before):
                np.testing.assert_allclose(qcore.partial_trace(w.register, [q]), ref, atol=1e-10)


class TestMotion:
    def test_single_cell_grid(self):
        w = World(GridSpec.uniform(1, 1, QUIET), Dynamics(), 3)
        ind = w.spawn_primordial((0.0, 0, 0), (0, 0))
        for _ in range(20):
            w.move_all()
        assert ind.position == (0, 0)

    def test_stay_probability_one(self):
        w = quiet_world(5, 5)
        ind = w.spawn_primordial((0.0, 0, 0), (2, 3))
        for _ in range(20):
            w.move_all()
        assert ind.position == (2, 3)

    def test_wraps_around(self):
        w = quiet_world(4, 4, move_probs=(0, 1, 0, 0, 0))
        ind = w.spawn_primordial((0.0, 0, 0), (0, 2))
        w.move_all()
        assert ind.position == (3, 2)
        assert w.events[-1].params == {"frm": [0, 2], "to": [3, 2]}

    def test_symmetric_line_walk(self):
        n = 10_000
        w = quiet_world(1, 20_001, seed=5, move_probs=(0, 0, 0, 0.5, 0.5), log_moves=False)
        ind = w.spawn_primordial((0.0, 0, 0), (0, 10_000))
        cols = [ind.position[1]]
        for _ in range(n):
            w.move_all()
            cols.append(ind.position[1])
        steps = np.diff(cols)
        assert set(np.unique(steps)) <= {-1, 1}
        assert abs(steps.mean()) <= 4 / math.sqrt(n)
        assert steps.var() == pytest.approx(1.0, abs=0.01)
        assert abs(cols[-1] - cols[0]) <= 4 * math.sqrt(n)


class TestStepping:
    def test_dissipation_follows_closed_form(self):
        w = quiet_world(dt=0.05)
        ind = w.spawn_primordial((0.4, 0, 0), (0, 0))
        for k in range(1, 41):
            w.step()
            assert w.phenotype_sigma_z(ind) == pytest.approx(
                channels.phenotype_decay_closed_form(0.4, 1.0, 0.05 * k), abs=1e-12)
            assert w.genotype_sigma_z(ind) == pytest.approx(-0.2, abs=1e-12)

    def test_death_at_first_step_past_threshold(self):
        w = quiet_world(dt=0.1)
        ind = w.spawn_primordial((0.5, 0, 0), (0, 0))
        w.run(6.0)
        expected = math.ceil(channels.death_time(0.5, 1.0, 0.01) / 0.1) * 0.1
        assert ind.death_time == pytest.approx(expected)
        assert ind.death_time == pytest.approx(4.7)

    def test_short_lived_dies_first(self):
        w = quiet_world()
        long_lived = w.spawn_primordial((0.0, 0, 0), (0, 0))
        short_lived = w.spawn_primordial((0.9, 0, 0), (0, 0))
        w.run(4.0)
        assert not short_lived.alive and long_lived.alive

    def test_dead_keep_genotype(self):
        w = quiet_world()
        ind = w.spawn_primordial((0.8, 0, 0), (0, 0))
        w.run(5.0)
        assert not ind.alive
        assert w.genotype_sigma_z(ind) == pytest.approx(0.6, abs=1e-12)

    def test_saturating_replication(self):
        region = RegionParams(mutation_rate=0.0, replication_prob=1.0, gamma=0.0, copy_error_prob=0.0)
        w = quiet_world(region=region, qubit_cap=8)
        w.spawn_primordial((0.2, 0, 0), (0, 0))
        for _ in range(5):
            w.step()
        assert len(w.individuals) == 4
        assert w.register.num_qubits == 8
        assert any(ev.kind == "replication_skipped" for ev in w.events)

    def test_same_seed_same_history(self):
        region = RegionParams(mutation_rate=0.1, replication_prob=0.1, gamma=1.0, copy_error_prob=0.2)

        def history(seed):
            w = World(GridSpec.uniform(3, 3, region), Dynamics(qubit_cap=8), seed)
            w.spawn_primordial((0.3, 0.2, 0.1), (1, 1))
            w.spawn_primordial((0.6, 0.0, 0.0), (1, 2))
            w.run(3.0)
            return w.event_log_lines(), w.register.matrix

        log1, rho1 = history(11)
        log2, rho2 = history(11)
        assert log1 == log2
        np.testing.assert_array_equal(rho1, rho2)
        assert history(12)[0] != log1

    def test_forced_events(self):
        forced = [ForcedEvent(0.5, "mutate", (0,), 1.0), ForcedEvent(0.5, "replicate", (0,))]
        w = World(GridSpec.uniform(1, 1, QUIET), Dynamics(move_probs=STILL), 0, forced)
        w.spawn_primordial((0.3, 0, 0), (0, 0))
        w.run(1.0)
        kinds = [ev.kind for ev in w.events]
        assert kinds.index("mutate") < kinds.index("birth")
        assert next(ev for ev in w.events if ev.kind == "mutate").time == pytest.approx(0.5)

    def test_forced_interaction_with_dead_is_skipped(self):
        forced = [ForcedEvent(0.5, "interact", (0, 1))]
        w = World(GridSpec.uniform(1, 1, QUIET), Dynamics(move_probs=STILL), 0, forced)
        w.spawn_primordial((1.0, 0, 0), (0, 0))
        w.spawn_primordial((0.3, 0, 0), (0, 0))
        w.run(1.0)
        assert "interaction_skipped" in [ev.kind for ev in w.events]


def random_world(seed, **dyn):
    region = RegionParams(mutation_rate=0.0, replication_prob=0.15, gamma=1.0, copy_error_prob=0.0)
    w = World(GridSpec.uniform(2, 2, region), Dynamics(qubit_cap=8, **dyn), seed)
    w.spawn_primordial((0.2, 0, 0), (0, 0))
    w.spawn_primordial((0.7, 0, 0), (0, 1))
    return w


class TestInvariants:
    @pytest.mark.parametrize("seed", range(5))
    def test_genotypes_conserved_without_mutation(self, seed):
        w = random_world(seed)
        w.run(4.0)
        founders = {0: -0.6, 1: 0.4}
        for ind in w.individuals:
            root = ind
            while root.lineage is not None:
                root = w[root.lineage]
            assert w.genotype_sigma_z(ind) == pytest.approx(founders[root.id], abs=1e-9)

    @pytest.mark.parametrize("seed", range(3))
    def test_population_and_register_size(self, seed):
        w = random_world(seed)
        counts = []
        for _ in range(30):
            w.step()
            counts.append(len(w.individuals))
            assert w.register.num_qubits == 2 * len(w.individuals) <= 8
            assert len(set(w.register.labels)) == w.register.num_qubits
            diag = qcore.validate(w.register)
            assert diag.trace_defect <= 1e-10 and diag.hermiticity_defect <= 1e-10
        assert counts == sorted(counts)

    @pytest.mark.parametrize("seed", range(3))
    def test_phenotypes_only_age_without_interactions(self, seed):
        w = random_world(seed, interaction_prob=0.0)
        last = {}
        for _ in range(30):
            w.step()
            for ind in w.individuals:
                value = w.phenotype_sigma_z(ind)
                assert value >= last.get(ind.id, -1.0) - 1e-12
                last[ind.id] = value

    def test_recycle_mode_reuses_dead_phenotype(self):
        w = quiet_world(qubit_cap=6, recycle=True, interaction_prob=0.0)
        dead = w.spawn_primordial((1.0, 0, 0), (0, 0))
        parent = w.spawn_primordial((0.2, 0, 0), (0, 0))
        w.step()
        assert not dead.alive
        child = w.replicate(parent, copy_error=False)
        assert w.register.num_qubits == 5
        assert child.phenotype_qubit == 1 and dead.phenotype_qubit is None
        assert w.events[-1].params["recycled_from"] == dead.id
        assert w.phenotype_sigma_z(child) == pytest.approx(-0.6, abs=1e-12)

    def test_trace_out_mode_shrinks_register(self):
        w = quiet_world(trace_out_dead=True, interaction_prob=0.0)
        dead = w.spawn_primordial((1.0, 0, 0), (0, 0))
        alive = w.spawn_primordial((0.2, 0, 0), (0, 0))
        w.step()
        assert w.register.num_qubits == 2
        assert dead.genotype_qubit is None and w.genotype_sigma_z(dead) == pytest.approx(1.0)
        assert w.genotype_sigma_z(alive) == pytest.approx(-0.6, abs=1e-12)
        assert w.phenotype_sigma_z(alive) == pytest.approx(channels.phenotype_decay_closed_form(0.2, 1.0, 0.1),
                                                           abs=1e-12)
