"""Divergence, association policies, scheduling, and the energy rollout."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hetfl.association import (
    Association,
    DataSplit,
    EnergyScenario,
    InfeasibleError,
    _DivergenceTracker,
    bfs_optimal,
    dhda_trigger,
    dhda_update,
    divergence,
    frame_energy_step,
    h2rma_associate,
    initial_ranges,
    random_associate,
    run_frames,
    schedule_devices,
)
from hetfl.energy import EnergyError


def small_scenario(betas, bd, b0, n_frames=2, alpha=2.0, b_max=10.0):
    """Scenario with unit noise gains and simple round-number factors.

    Rate equal to bandwidth makes the access factor sigma2 * q_bits /
    bandwidth = 1e-3 and the backhaul factor the same.
    """
    betas = np.asarray(betas, dtype=float)
    bd = np.asarray(bd, dtype=float)
    return EnergyScenario(
        n_frames=n_frames,
        sigma2=1e-3,
        bandwidth=1e6,
        q_bits=1e6,
        r_dev=1e6,
        r_mec=1e6,
        e_cir_dev=0.01,
        e_cir_mec=0.02,
        e_cmp=0.05,
        n_mec_antennas=4,
        b_max=b_max,
        b0=np.asarray(b0, dtype=float),
        betas=betas,
        bd=bd,
        fading=None,
        alpha=alpha,
    )


class TestDataSplit:
    def test_global_distribution(self):
        split = DataSplit(np.array([[4, 0, 2], [0, 4, 2]]))
        np.testing.assert_allclose(split.global_p, [0.5, 0.5])
        assert split.total == 12
        assert split.n_classes == 2 and split.n_devices == 3

    def test_rejects_bad_counts(self):
        with pytest.raises(ValueError):
            DataSplit(np.array([[1.0, 2.0]]))  # non-integer
        with pytest.raises(ValueError):
            DataSplit(np.array([[-1, 2]]))
        with pytest.raises(ValueError):
            DataSplit(np.array([[1, 0], [1, 0]]))  # empty device
        with pytest.raises(ValueError):
            DataSplit(np.array([1, 2, 3]))


class TestAssociation:
    def test_from_assignment_round_trip(self):
        assoc = Association.from_assignment(np.array([0, 2, 2, 1]), 3)
        np.testing.assert_array_equal(assoc.assignment, [0, 2, 2, 1])
        np.testing.assert_array_equal(assoc.members(2), [1, 2])
        assert assoc.n_mecs == 3 and assoc.n_devices == 4
        assert [list(g) for g in assoc.groups()] == [[0], [3], [1, 2]]

    def test_rejects_invalid_matrices(self):
        with pytest.raises(ValueError):
            Association(np.array([[1, 2], [0, 0]]))
        with pytest.raises(ValueError):
            Association(np.array([[1, 1], [1, 0]]))  # double association
        with pytest.raises(ValueError):
            Association.from_assignment(np.array([0, 3]), 2)


class TestDivergence:
    def test_identical_mixes_give_zero(self):
        split = DataSplit(np.full((2, 4), 10))
        assoc = Association.from_assignment(np.array([0, 0, 1, 1]), 2)
        assert abs(divergence(split, assoc)) < 1e-15

    def test_disjoint_classes_give_one(self):
        split = DataSplit(np.array([[10, 10, 0, 0], [0, 0, 10, 10]]))
        assoc = Association.from_assignment(np.array([0, 0, 1, 1]), 2)
        np.testing.assert_allclose(divergence(split, assoc), 1.0, rtol=1e-14)

    def test_single_server_is_always_zero(self):
        rng = np.random.default_rng(0)
        split = DataSplit(rng.integers(1, 20, size=(5, 8)))
        assoc = Association.from_assignment(np.zeros(8, dtype=int), 3)
        assert abs(divergence(split, assoc)) < 1e-15

    def test_active_mask_hand_case(self):
        # active pool {0, 2}: global (0.75, 0.25); each server contributes
        # weight 1/2 and L1 gap 1/2, so theta = 0.5
        split = DataSplit(np.array([[8, 0, 4], [0, 8, 4]]))
        assoc = Association.from_assignment(np.array([0, 1, 1]), 2)
        th = divergence(split, assoc, active=np.array([True, False, True]))
        np.testing.assert_allclose(th, 0.5, rtol=1e-14)

    def test_no_active_devices(self):
        split = DataSplit(np.array([[1, 1], [1, 1]]))
        assoc = Association.from_assignment(np.array([0, 1]), 2)
        assert divergence(split, assoc, active=np.zeros(2, dtype=bool)) == 0.0

    @given(
        counts=arrays(np.int64, (3, 6), elements=st.integers(0, 30)),
        assignment=arrays(np.int64, 6, elements=st.integers(0, 2)),
    )
    @settings(max_examples=150, deadline=None)
    def test_bounded_by_the_l1_diameter(self, counts, assignment):
        counts = counts + 1  # every device holds data
        split = DataSplit(counts)
        assoc = Association.from_assignment(assignment, 3)
        th = divergence(split, assoc)
        assert -1e-12 <= th <= 2.0 + 1e-12


class TestDivergenceTracker:
    def test_matches_the_direct_evaluation_under_random_moves(self):
        rng = np.random.default_rng(1)
        split = DataSplit(rng.integers(1, 15, size=(4, 12)))
        assignment = rng.integers(0, 3, size=12)
        tracker = _DivergenceTracker(split, 3)
        for k in range(12):
            tracker.assign(split.counts[:, k], assignment[k])
        for _ in range(50):
            k = int(rng.integers(12))
            m_new = int(rng.integers(3))
            tracker.remove(split.counts[:, k], assignment[k])
            tracker.assign(split.counts[:, k], m_new)
            assignment[k] = m_new
            direct = divergence(split, Association.from_assignment(assignment, 3))
            np.testing.assert_allclose(tracker.theta, direct, atol=1e-12)

    def test_candidate_probe_equals_the_post_assign_value(self):
        rng = np.random.default_rng(2)
        split = DataSplit(rng.integers(1, 15, size=(3, 5)))
        tracker = _DivergenceTracker(split, 2)
        tracker.assign(split.counts[:, 0], 0)
        tracker.assign(split.counts[:, 1], 1)
        probe = tracker.candidate_theta(split.counts[:, 2], 1)
        tracker.assign(split.counts[:, 2], 1)
        np.testing.assert_allclose(probe, tracker.theta, atol=1e-14)


class TestH2rma:
    # Hand-traced instance: S columns (4,0), (0,4), (2,2); global p = (.5, .5).
    # Device 0 falls back to its strongest server 0 (range becomes 0.9) and
    # device 1 to server 1 (range 0.8).  Device 2 is then in range of both
    # (0.92 >= 0.9, 0.95 >= 0.8) with the same provisional divergence 2/3 on
    # each.
    SPLIT = np.array([[4, 0, 2], [0, 4, 2]])
    GAINS = np.array([[0.9, 0.2, 0.92], [0.1, 0.8, 0.95]])

    def test_in_range_tie_goes_to_the_lowest_index(self):
        # 2/3 <= theta_max: device 2 joins server 0 despite the higher gain
        # at server 1
        assoc = h2rma_associate(DataSplit(self.SPLIT), self.GAINS, theta_max=0.8)
        np.testing.assert_array_equal(assoc.assignment, [0, 1, 0])

    def test_divergence_cap_forces_the_closest_fallback(self):
        # 2/3 > theta_max: both in-range candidates are rejected and device 2
        # falls back to the strongest gain, server 1
        assoc = h2rma_associate(DataSplit(self.SPLIT), self.GAINS, theta_max=0.5)
        np.testing.assert_array_equal(assoc.assignment, [0, 1, 1])

    def test_first_device_takes_its_strongest_server(self):
        rng = np.random.default_rng(3)
        split = DataSplit(rng.integers(1, 10, size=(4, 7)))
        gains = rng.uniform(1e-6, 1.0, size=(3, 7))
        assoc = h2rma_associate(split, gains, theta_max=1e9)
        assert assoc.assignment[0] == int(np.argmax(gains[:, 0]))

    def test_output_is_always_a_valid_association(self):
        rng = np.random.default_rng(4)
        for theta_max in (0.0, 0.3, 2.0):
            split = DataSplit(rng.integers(1, 10, size=(3, 9)))
            gains = rng.uniform(1e-6, 1.0, size=(4, 9))
            assoc = h2rma_associate(split, gains, theta_max)
            np.testing.assert_array_equal(assoc.chi.sum(axis=0), np.ones(9))

    def test_device_count_mismatch(self):
        with pytest.raises(ValueError):
            h2rma_associate(DataSplit(self.SPLIT), np.ones((2, 5)), 0.5)

    def test_full_server_spills_to_the_next_best(self):
        # all three devices prefer server 0, but it only has two antennas
        split = DataSplit(np.full((2, 3), 5))
        gains = np.array([[0.9, 0.8, 0.7], [0.1, 0.2, 0.3]])
        assoc = h2rma_associate(split, gains, theta_max=2.0, capacity=2)
        np.testing.assert_array_equal(assoc.assignment, [0, 0, 1])
        uncapped = h2rma_associate(split, gains, theta_max=2.0)
        np.testing.assert_array_equal(uncapped.assignment, [0, 0, 0])

    def test_capacity_smaller_than_the_population_is_infeasible(self):
        split = DataSplit(np.full((2, 5), 5))
        gains = np.random.default_rng(14).uniform(0.1, 1.0, size=(2, 5))
        with pytest.raises(InfeasibleError):
            h2rma_associate(split, gains, theta_max=2.0, capacity=2)


class TestRandomAssociate:
    def test_reproducible_and_valid(self):
        a = random_associate(10, 3, np.random.default_rng(5))
        b = random_associate(10, 3, np.random.default_rng(5))
        np.testing.assert_array_equal(a.chi, b.chi)
        np.testing.assert_array_equal(a.chi.sum(axis=0), np.ones(10))

    def test_uniform_shares(self):
        rng = np.random.default_rng(6)
        assoc = random_associate(40000, 4, rng)
        shares = assoc.chi.sum(axis=1) / 40000
        np.testing.assert_allclose(shares, np.full(4, 0.25), atol=0.01)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            random_associate(5, 0, np.random.default_rng(7))

    def test_capacity_bounds_every_server(self):
        rng = np.random.default_rng(15)
        for _ in range(20):
            assoc = random_associate(10, 2, rng, capacity=6)
            assert np.bincount(assoc.assignment, minlength=2).max() <= 6
        with pytest.raises(InfeasibleError):
            random_associate(5, 2, rng, capacity=2)


class TestInitialRanges:
    def test_weakest_member_defines_the_range(self):
        gains = np.array([[0.9, 0.2, 0.92], [0.1, 0.8, 0.95]])
        assoc = Association.from_assignment(np.array([0, 1, 1]), 2)
        np.testing.assert_allclose(initial_ranges(assoc, gains), [0.9, 0.8])

    def test_empty_server_keeps_the_sentinel(self):
        gains = np.array([[0.5], [0.4]])
        assoc = Association.from_assignment(np.array([0]), 2)
        ranges = initial_ranges(assoc, gains)
        assert ranges[0] == 0.5 and ranges[1] == np.inf


class TestDhda:
    SPLIT = DataSplit(np.array([[4, 0, 2], [0, 4, 2]]))
    GAINS = np.array([[0.9, 0.2, 0.92], [0.1, 0.8, 0.95]])

    def test_trigger_cadence(self):
        assert not dhda_trigger(0, 20.0, 7.0)
        assert not dhda_trigger(10, 20.0, 7.0)
        assert dhda_trigger(14, 20.0, 7.0)
        assert dhda_trigger(20, 20.0, 7.0)
        assert not dhda_trigger(50, np.inf, np.inf)

    def test_no_movers_returns_the_same_object(self):
        assoc = Association.from_assignment(np.array([0, 1, 1]), 2)
        ranges = initial_ranges(assoc, self.GAINS)
        assert dhda_update(assoc, ranges, self.SPLIT, self.GAINS, [], 0.5) is assoc

    def test_out_of_range_mover_falls_back_and_widens_the_range(self):
        assoc = Association.from_assignment(np.array([0, 1, 1]), 2)
        ranges = initial_ranges(assoc, self.GAINS)
        moved_gains = self.GAINS.copy()
        moved_gains[:, 1] = [0.3, 0.05]  # device 1 drifted away from server 1
        upd = dhda_update(assoc, ranges, self.SPLIT, moved_gains, [1], 0.5)
        np.testing.assert_array_equal(upd.assignment, [0, 0, 1])
        np.testing.assert_allclose(ranges, [0.3, 0.8])  # widened in place

    def test_in_range_mover_joins_without_touching_ranges(self):
        assoc = Association.from_assignment(np.array([0, 1, 1]), 2)
        ranges = initial_ranges(assoc, self.GAINS)
        moved_gains = self.GAINS.copy()
        moved_gains[:, 1] = [0.91, 0.05]  # now inside server 0's radius
        upd = dhda_update(assoc, ranges, self.SPLIT, moved_gains, [1], 0.5)
        np.testing.assert_array_equal(upd.assignment, [0, 0, 1])
        np.testing.assert_allclose(ranges, [0.9, 0.8])

    def test_full_server_rejects_a_mover(self):
        # device 2 is in range of both servers with a tied divergence; the
        # index tie-break would pick server 0, but server 0 is full
        assoc = Association.from_assignment(np.array([0, 0, 1]), 2)
        ranges = initial_ranges(assoc, self.GAINS)
        uncapped = dhda_update(assoc, ranges.copy(), self.SPLIT, self.GAINS, [2], 0.5)
        np.testing.assert_array_equal(uncapped.assignment, [0, 0, 0])
        capped = dhda_update(assoc, ranges, self.SPLIT, self.GAINS, [2], 0.5, capacity=2)
        np.testing.assert_array_equal(capped.assignment, [0, 0, 1])

    def test_unmoved_devices_keep_their_server(self):
        rng = np.random.default_rng(8)
        split = DataSplit(rng.integers(1, 10, size=(3, 8)))
        gains = rng.uniform(1e-6, 1.0, size=(3, 8))
        assoc = h2rma_associate(split, gains, 0.5)
        ranges = initial_ranges(assoc, gains)
        upd = dhda_update(assoc, ranges, split, gains, [2, 5], 0.5)
        keep = [k for k in range(8) if k not in (2, 5)]
        np.testing.assert_array_equal(upd.assignment[keep], assoc.assignment[keep])


class TestFrameRollout:
    def test_spreadsheet_oracle(self):
        # M=1, K=2, unit noise gains; factors 1e-3, beams (1.0, 0.2):
        # every frame the second device binds with budget 0.305 J while the
        # first accumulates charge (0.344 J then 0.588 J)
        assoc = Association.from_assignment(np.array([0, 0]), 1)
        scen = small_scenario(betas=[[0.5, 0.1]], bd=[[2.0], [2.0]], b0=[0.1, 0.0])
        wet, ledger, delta = run_frames(assoc, scen)
        np.testing.assert_allclose(delta, 1.302, rtol=1e-12)
        np.testing.assert_allclose(grid_delta := ledger.delta, delta, rtol=1e-15)
        np.testing.assert_allclose(ledger.e_wet, [[0.305], [0.305]], rtol=1e-12)
        np.testing.assert_allclose(ledger.harvest, [[0.305, 0.061], [0.305, 0.061]], rtol=1e-12)
        np.testing.assert_allclose(ledger.battery, [[0.344, 0.0], [0.588, 0.0]], atol=1e-12)
        np.testing.assert_allclose(ledger.e_bh, [[5e-4], [5e-4]], rtol=1e-12)
        np.testing.assert_allclose(ledger.e_mec, [[0.3255], [0.3255]], rtol=1e-12)
        np.testing.assert_allclose(wet.xi, [[0.5, 0.5]], rtol=1e-15)
        assert grid_delta == delta

    def test_zero_frames(self):
        assoc = Association.from_assignment(np.array([0, 0]), 1)
        scen = small_scenario(betas=[[0.5, 0.1]], bd=[[2.0]], b0=[0.1, 0.0], n_frames=0)
        wet, ledger, delta = run_frames(assoc, scen)
        assert delta == 0.0 and ledger.n_frames == 0

    def test_sufficient_batteries_need_no_transfer(self):
        # with full batteries the grid pays only circuit and backhaul energy
        assoc = Association.from_assignment(np.array([0, 1]), 2)
        scen = small_scenario(betas=[[0.5, 0.1], [0.2, 0.4]], bd=[[2.0, 4.0]] * 3,
                              b0=[10.0, 10.0], n_frames=3, alpha=1.0)
        _, ledger, delta = run_frames(assoc, scen)
        assert np.all(ledger.e_wet == 0.0)
        expected = 3 * (2 * 0.02 + 1e-3 / 2.0 + 1e-3 / 4.0)
        np.testing.assert_allclose(delta, expected, rtol=1e-12)

    def test_empty_server_pays_only_circuit_energy(self):
        assoc = Association.from_assignment(np.array([0, 0]), 2)
        scen = small_scenario(betas=[[0.5, 0.1], [0.2, 0.4]], bd=[[2.0, 4.0]], b0=[0.0, 0.0], n_frames=1)
        _, ledger, _ = run_frames(assoc, scen)
        assert ledger.e_wet[0, 1] == 0.0
        assert ledger.e_bh[0, 1] == 0.0
        np.testing.assert_allclose(ledger.e_mec[0, 1], 0.02, rtol=1e-15)

    def test_binding_device_ends_the_frame_empty(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            m, k = int(rng.integers(1, 4)), int(rng.integers(2, 7))
            assoc = Association.from_assignment(rng.integers(0, m, size=k), m)
            scen = small_scenario(
                betas=rng.uniform(1e-3, 1.0, size=(m, k)),
                bd=rng.uniform(0.5, 5.0, size=(4, m)),
                b0=rng.uniform(0.0, 0.2, size=k),
                n_frames=4,
            )
            _, ledger, delta = run_frames(assoc, scen)
            assert ledger.battery.min() >= -1e-12
            assert ledger.battery.max() <= scen.b_max + 1e-12
            for l in range(4):
                for m_i in range(m):
                    if ledger.e_wet[l, m_i] > 1e-12:
                        members = assoc.members(m_i)
                        assert ledger.battery[l, members].min() < 1e-9

    def test_zero_beta_cannot_be_recharged(self):
        assoc = Association.from_assignment(np.array([0]), 1)
        scen = small_scenario(betas=[[0.0]], bd=[[2.0]], b0=[0.0], n_frames=1)
        with pytest.raises(EnergyError):
            run_frames(assoc, scen)

    def test_inactive_devices_neither_spend_nor_harvest(self):
        assoc = Association.from_assignment(np.array([0, 0]), 1)
        scen = small_scenario(betas=[[0.5, 0.1]], bd=[[2.0]], b0=[0.1, 0.0], n_frames=1)
        batteries = scen.b0.copy()
        frame = frame_energy_step(0, assoc.groups(), np.array([True, False]), batteries, scen)
        assert frame["e_dev"][1] == 0.0 and frame["harvest"][1] == 0.0
        assert batteries[1] == 0.0
        # the beam share still spans both members, so the active device's
        # share stays 1/2
        np.testing.assert_allclose(frame["harvest"][0], frame["e_wet"][0] * 0.5 * 0.5 * 4, rtol=1e-12)


class TestBfs:
    def _instance(self):
        rng = np.random.default_rng(10)
        split = DataSplit(np.array([[4, 0, 2], [0, 4, 2]]))
        betas = rng.uniform(0.01, 0.6, size=(2, 3))
        scen = small_scenario(betas=betas, bd=[[2.0, 3.0]] * 3, b0=[0.0, 0.05, 0.1], n_frames=3)
        return split, betas, scen

    def _oracle(self, split, betas, scen, theta_max):
        """Plain-loop exhaustive search re-deriving every energy term."""
        import itertools

        best_cost, best_assignment = np.inf, None
        p = split.global_p
        for cand in itertools.product(range(2), repeat=3):
            counts = np.zeros((2, split.n_classes))
            tot = np.zeros(2)
            for k, m in enumerate(cand):
                counts[m] += split.counts[:, k]
                tot[m] += split.counts[:, k].sum()
            theta = sum(
                tot[m] / split.total * np.abs(p - counts[m] / tot[m]).sum()
                for m in range(2)
                if tot[m] > 0
            )
            if theta > theta_max:
                continue
            batteries = scen.b0.copy().astype(float)
            cost = 0.0
            for l in range(scen.n_frames):
                for m in range(2):
                    members = [k for k in range(3) if cand[k] == m]
                    e_mec = scen.e_cir_mec
                    if members:
                        e_wet = 0.0
                        beams, e_devs = {}, {}
                        for k in members:
                            e_ac = scen.sigma2 * scen.q_bits * (2 ** (scen.r_dev / scen.bandwidth) - 1) / scen.r_dev
                            e_devs[k] = scen.e_cir_dev + scen.e_cmp + e_ac
                            beams[k] = betas[m, k] / len(members) * scen.n_mec_antennas
                            e_wet = max(e_wet, (e_devs[k] - batteries[k]) / beams[k])
                        e_wet = max(0.0, e_wet)
                        for k in members:
                            batteries[k] = min(scen.b_max, max(0.0, batteries[k] - e_devs[k] + e_wet * beams[k]))
                        bh_gain = scen.bd[l][m]
                        e_bh = scen.sigma2 * scen.q_bits * (2 ** (scen.r_mec / scen.bandwidth) - 1) / (scen.r_mec * bh_gain)
                        e_mec += e_wet + e_bh
                    cost += 2.0 * e_mec  # alpha = 2
            if cost < best_cost - 1e-15:
                best_cost, best_assignment = cost, cand
        return best_assignment, best_cost

    def test_matches_the_plain_loop_oracle(self):
        split, betas, scen = self._instance()
        for theta_max in (2.0, 0.5):
            assoc, cost = bfs_optimal(split, betas, scen, theta_max)
            want_assignment, want_cost = self._oracle(split, betas, scen, theta_max)
            np.testing.assert_array_equal(assoc.assignment, want_assignment)
            np.testing.assert_allclose(cost, want_cost, rtol=1e-12)

    def test_never_beaten_by_any_feasible_assignment(self):
        import itertools

        split, betas, scen = self._instance()
        _, cost = bfs_optimal(split, betas, scen, 2.0)
        for cand in itertools.product(range(2), repeat=3):
            assoc = Association.from_assignment(np.array(cand), 2)
            _, _, other = run_frames(assoc, scen, with_ledger=False)
            assert cost <= other + 1e-12

    def test_impossible_divergence_cap(self):
        split, betas, scen = self._instance()
        with pytest.raises(InfeasibleError):
            bfs_optimal(split, betas, scen, -1.0)

    def test_oversized_instance_is_refused(self):
        rng = np.random.default_rng(11)
        split = DataSplit(rng.integers(1, 5, size=(2, 20)))
        scen = small_scenario(betas=np.ones((3, 20)), bd=[[1.0, 1.0, 1.0]], b0=np.zeros(20), n_frames=1)
        with pytest.raises(ValueError):
            bfs_optimal(split, np.ones((3, 20)), scen, 2.0)

    def test_capacity_restricts_the_search_space(self):
        # capacity one over two devices and two servers leaves only the two
        # permutations; the cheaper one keeps each device on its better beam
        split, betas, scen = self._instance()
        split2 = DataSplit(split.counts[:, :2])
        betas2 = betas[:, :2]
        scen2 = small_scenario(betas=betas2, bd=[[2.0, 3.0]] * 3, b0=[0.0, 0.05], n_frames=3)
        assoc, _ = bfs_optimal(split2, betas2, scen2, 2.0, capacity=1)
        assert sorted(assoc.assignment) == [0, 1]


class TestScheduling:
    # S columns (8,0), (0,8), (4,4); devices 0 and 1 report to server 0,
    # device 2 to server 1; all-active divergence is zero
    SPLIT = DataSplit(np.array([[8, 0, 4], [0, 8, 4]]))
    ASSOC = Association.from_assignment(np.array([0, 0, 1]), 2)
    E_AC = np.array([0.2, 0.7, 0.6])

    def test_infinite_threshold_keeps_everyone_active(self):
        active = schedule_devices(self.E_AC, np.inf, self.SPLIT, self.ASSOC, 0.5)
        assert active.all()

    def test_candidates_are_tried_in_decreasing_energy_order(self):
        # dropping device 1 leaves theta = 0.5, rejected at cap 0.4; dropping
        # device 2 afterwards leaves theta = 0 and is accepted
        active = schedule_devices(self.E_AC, 0.5, self.SPLIT, self.ASSOC, 0.4)
        np.testing.assert_array_equal(active, [True, True, False])

    def test_loose_cap_deactivates_every_candidate(self):
        active = schedule_devices(self.E_AC, 0.5, self.SPLIT, self.ASSOC, 2.0)
        np.testing.assert_array_equal(active, [True, False, False])

    def test_zero_cap_still_allows_theta_preserving_drops(self):
        # dropping device 2 removes server 1 entirely and leaves the active
        # mix equal to the global one
        active = schedule_devices(self.E_AC, 0.5, self.SPLIT, self.ASSOC, 0.0)
        np.testing.assert_array_equal(active, [True, True, False])

    def test_cheap_devices_are_never_touched(self):
        rng = np.random.default_rng(12)
        split = DataSplit(rng.integers(1, 10, size=(3, 6)))
        assoc = random_associate(6, 2, rng)
        e_ac = rng.uniform(0.0, 1.0, size=6)
        active = schedule_devices(e_ac, 0.8, split, assoc, 2.0)
        assert active[e_ac <= 0.8].all()

    def test_accepted_pool_respects_the_cap(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            split = DataSplit(rng.integers(1, 10, size=(3, 7)))
            assoc = random_associate(7, 3, rng)
            e_ac = rng.uniform(0.0, 1.0, size=7)
            theta_max = float(rng.uniform(0.0, 1.0))
            active = schedule_devices(e_ac, 0.5, split, assoc, theta_max)
            base = divergence(split, assoc)
            after = divergence(split, assoc, active)
            assert after <= max(theta_max, base) + 1e-12
