"""Algorithm state machines: exact reductions, conservation laws, stopping."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coordtrack import algorithms, backend, graph, metrics, selection, signals


def cycle_matrix(K):
    return graph.metropolis_weights(graph.build_cycle(K))


def complete_matrix(K):
    return graph.metropolis_weights(graph.build_complete(K))


class TestInit:
    def test_initial_state_equals_first_observation(self):
        A = cycle_matrix(4)
        m = signals.StaticSignal(4, 3, seed=0)
        run = algorithms.init_run(A, m, "indep_coord")
        assert np.array_equal(run.W, m.sample_all(0))
        assert np.array_equal(run.V, m.sample_all(0))
        assert np.array_equal(run.P, np.ones((4, 3)))
        assert run.iteration == 0 and run.scalars_sent == 0

    def test_unknown_algorithm_rejected(self):
        with pytest.raises(ValueError, match="unknown algorithm"):
            algorithms.init_run(cycle_matrix(3), signals.StaticSignal(3, 1, 0), "sgd")

    def test_matrix_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            algorithms.init_run(cycle_matrix(4), signals.StaticSignal(3, 1, 0),
                                "diffusion")

    def test_step_size_validated(self):
        m = signals.StaticSignal(3, 1, 0)
        with pytest.raises(ValueError):
            algorithms.init_run(cycle_matrix(3), m, "exact_diffusion", mu=0.0)
        with pytest.raises(ValueError):
            algorithms.init_run(cycle_matrix(3), m, "exact_diffusion", mu=1.5)

    def test_diffusion_combined_form_requires_unit_step(self):
        run = algorithms.init_run(cycle_matrix(3), signals.StaticSignal(3, 1, 0),
                                  "diffusion", mu=0.5)
        with pytest.raises(ValueError, match="mu"):
            run.step()

    def test_scalar_accounting(self):
        N = 7
        expected = {"consensus": N, "diffusion": N, "exact_diffusion": N,
                    "extra": N, "diging": 2 * N, "sync_coord": 2,
                    "indep_coord": 3, "indep_coord_nopush": 2}
        for alg, per_iter in expected.items():
            m = signals.StaticSignal(4, N, seed=1)
            run = algorithms.init_run(cycle_matrix(4), m, alg)
            run.step()
            run.step()
            assert run.scalars_sent == 2 * per_iter, alg


class TestDynamicConsensus:
    def test_two_agents_average_in_one_step(self):
        m = signals.FixedSignal([[1.0], [3.0]])
        run = algorithms.init_run(complete_matrix(2), m, "consensus")
        run.step()
        assert np.allclose(run.W, 2.0, atol=1e-15)

    def test_static_signal_reduces_to_static_consensus(self):
        A = cycle_matrix(5)
        m = signals.StaticSignal(5, 3, seed=2)
        run = algorithms.init_run(A, m, "consensus")
        W = m.sample_all(0).copy()
        for _ in range(10):
            run.step()
            W = A.T @ W
            assert np.allclose(run.W, W, atol=1e-14)

    def test_uniform_drift_shifts_the_static_trajectory(self):
        # r_{k,i} = r_k + c*i: subtracting c*i recovers the static recursion
        K, N, c = 5, 3, 0.25
        rng = np.random.default_rng(0)
        base = rng.standard_normal((K, N))
        table = np.stack([base + c * i for i in range(501)])
        m = signals.TableSignal(table)
        A = cycle_matrix(K)
        run = algorithms.init_run(A, m, "consensus")
        static = algorithms.init_run(A, signals.FixedSignal(base), "consensus")
        for i in range(1, 501):
            run.step()
            static.step()
            assert np.allclose(run.W - c * i, static.W, atol=1e-10)
        truth = m.true_average(500)
        assert np.max(np.abs(run.W - truth)) <= 1e-10


class TestDynamicDiffusion:
    def test_mean_conservation(self):
        A = cycle_matrix(6)
        m = signals.DecayingSinusoidRamp(6, 4, seed=3)
        run = algorithms.init_run(A, m, "diffusion")
        for _ in range(200):
            run.step()
            drift = run.W.mean(axis=0) - m.sample_all(run.iteration).mean(axis=0)
            assert np.max(np.abs(drift)) <= 1e-12

    def test_static_reduces_to_classical_consensus(self):
        A = cycle_matrix(5)
        m = signals.StaticSignal(5, 2, seed=4)
        run = algorithms.init_run(A, m, "diffusion")
        W = m.sample_all(0).copy()
        for _ in range(10):
            run.step()
            W = A.T @ W
            assert np.allclose(run.W, W, atol=1e-14)

    def test_explicit_three_step_form_matches_combined_form(self):
        A = cycle_matrix(5)
        m = signals.DecayingSinusoidRamp(5, 3, seed=5)
        combined = algorithms.init_run(A, m, "diffusion")
        explicit = algorithms.init_run(A, m, "exact_diffusion", mu=1.0)
        for _ in range(100):
            combined.step()
            explicit.step()
            assert np.max(np.abs(combined.W - explicit.W)) <= 1e-12

    def test_fractional_step_size_still_tracks(self):
        A = cycle_matrix(5)
        m = signals.StaticSignal(5, 2, seed=6)
        run = algorithms.init_run(A, m, "exact_diffusion", mu=0.5)
        algorithms.fast_forward(run, 500)
        assert np.max(np.abs(run.W - m.true_average(0))) <= 1e-9


class TestExtraBased:
    def test_correction_term_vanishes_at_consensus(self):
        # once all agents agree on a static signal, the trajectory is stationary
        K, N = 4, 2
        A = cycle_matrix(K)
        vals = np.tile(np.array([[0.7, -1.2]]), (K, 1))
        m = signals.FixedSignal(vals)
        run = algorithms.init_run(A, m, "extra")
        for _ in range(5):
            run.step()
            assert np.allclose(run.W, vals, atol=1e-14)

    def test_static_two_agent_convergence(self):
        m = signals.StaticSignal(2, 3, seed=7)
        run = algorithms.init_run(complete_matrix(2), m, "extra")
        for _ in range(200):
            run.step()
        assert np.max(np.abs(run.W - m.true_average(0))) <= 1e-9

    def test_matches_consensus_step_when_history_consensual(self):
        # with A = (1/K) 11^T and a consensual two-step history the correction
        # term vanishes, so one step agrees with dynamic consensus exactly
        K, N = 3, 2
        A = np.full((K, K), 1.0 / K)
        m = signals.DecayingSinusoidRamp(K, N, seed=8)
        extra = algorithms.init_run(A, m, "extra")
        cons = algorithms.init_run(A, m, "consensus")
        for _ in range(3):
            extra.step()
            cons.step()
        cons.W = extra.W.copy()
        cons.aux["r_prev"] = extra.aux["r_prev"].copy()
        extra.aux["w_prev2"] = np.tile(extra.W.mean(axis=0), (K, 1))
        extra.step()
        cons.step()
        assert np.allclose(extra.W, cons.W, atol=1e-13)


class TestDiGingBased:
    def test_static_convergence_of_state_and_tracker(self):
        m = signals.StaticSignal(3, 2, seed=9)
        run = algorithms.init_run(complete_matrix(3), m, "diging")
        for _ in range(200):
            run.step()
        assert np.max(np.abs(run.W - m.true_average(0))) <= 1e-9
        assert np.max(np.abs(run.aux["y"])) <= 1e-9

    def test_slower_than_diffusion_on_tracking(self):
        A = graph.metropolis_weights(graph.build_connected_geometric(25, 0.35, 4))
        m = signals.DecayingSinusoidRamp(25, 100, seed=10)
        dif = algorithms.init_run(A, m, "diffusion")
        dig = algorithms.init_run(A, m, "diging")
        for _ in range(100):
            dif.step()
            dig.step()
        truth = m.true_average(100)
        err_dif = np.sum((dif.W - truth) ** 2)
        err_dig = np.sum((dig.W - truth) ** 2)
        assert err_dif < err_dig


class TestSyncCoordinate:
    def test_single_entry_reduces_to_diffusion_bitwise(self):
        A = cycle_matrix(6)
        m = signals.DecayingSinusoidRamp(6, 1, seed=11)
        dif = algorithms.init_run(A, m, "diffusion")
        coord = algorithms.init_run(A, m, "sync_coord", seed=123)
        for _ in range(300):
            dif.step()
            coord.step()
        assert np.array_equal(dif.W, coord.W)

    def test_mean_coupling_with_memory(self):
        A = cycle_matrix(6)
        m = signals.DecayingSinusoidRamp(6, 5, seed=12)
        run = algorithms.init_run(A, m, "sync_coord", seed=1)
        for _ in range(400):
            run.step()
            gap = run.W.mean(axis=0) - run.V.mean(axis=0)
            assert np.max(np.abs(gap)) <= 1e-10

    def test_unselected_entries_untouched(self):
        A = cycle_matrix(5)
        m = signals.DecayingSinusoidRamp(5, 7, seed=13)
        run = algorithms.init_run(A, m, "sync_coord", seed=2)
        for _ in range(50):
            before = run.W.copy()
            i = run.iteration + 1
            n = int(selection.draw_indices(2, i, 5, 7, selection.SHARED).indices[0])
            run.step()
            untouched = [j for j in range(7) if j != n]
            assert np.array_equal(run.W[:, untouched], before[:, untouched])

    def test_oracle_variant_equals_memory_variant_on_static_signals(self):
        # with a static signal the memory v always equals the previous
        # observation, so staleness is the only possible difference
        A = cycle_matrix(5)
        m = signals.StaticSignal(5, 4, seed=14)
        mem = algorithms.init_run(A, m, "sync_coord", seed=3)
        orc = algorithms.init_run(A, m, "sync_coord", seed=3)
        for _ in range(100):
            mem.step()
            algorithms.step_sync_coordinate(orc, oracle_prev_signal=True)
        assert np.array_equal(mem.W, orc.W)

    def test_oracle_variant_diverges_from_memory_variant_when_moving(self):
        A = cycle_matrix(5)
        m = signals.DecayingSinusoidRamp(5, 4, seed=14)
        mem = algorithms.init_run(A, m, "sync_coord", seed=3)
        orc = algorithms.init_run(A, m, "sync_coord", seed=3)
        for _ in range(100):
            mem.step()
            algorithms.step_sync_coordinate(orc, oracle_prev_signal=True)
        assert not np.array_equal(mem.W, orc.W)


class TestIndepCoordinate:
    def test_mass_conservation(self):
        A = cycle_matrix(6)
        m = signals.DecayingSinusoidRamp(6, 5, seed=15)
        run = algorithms.init_run(A, m, "indep_coord", seed=4)
        for _ in range(400):
            run.step()
            assert np.max(np.abs(run.W.sum(axis=0) - run.V.sum(axis=0))) <= 1e-10
            assert np.max(np.abs(run.P.sum(axis=0) - 6.0)) <= 1e-10

    def test_single_agent_tracks_selected_entries(self):
        A = np.array([[1.0]])
        m = signals.DecayingSinusoidRamp(1, 4, seed=16)
        run = algorithms.init_run(A, m, "indep_coord", seed=5)
        for _ in range(100):
            i = run.iteration + 1
            n = int(selection.draw_indices(5, i, 1, 4,
                                           selection.INDEPENDENT).indices[0])
            run.step()
            assert abs(run.output()[0, n] - m.sample(0, i, n)) <= 1e-12

    def test_shared_forcing_reduces_to_sync_coordinate(self):
        A = cycle_matrix(6)
        m = signals.DecayingSinusoidRamp(6, 7, seed=17)
        sync = algorithms.init_run(A, m, "sync_coord", seed=6)
        forced = algorithms.init_run(A, m, "indep_coord", seed=6,
                                     selection_mode=selection.SHARED)
        for _ in range(300):
            sync.step()
            forced.step()
        assert np.max(np.abs(forced.P - 1.0)) <= 1e-12
        assert np.max(np.abs(forced.output() - sync.W)) <= 1e-12

    def test_no_push_variant_vanishes_on_zero_average_signals(self):
        A = cycle_matrix(5)
        m = signals.ZeroAverageWalk(5, 3, seed=18)
        run = algorithms.init_run(A, m, "indep_coord_nopush", seed=7)
        algorithms.fast_forward(run, 3000)
        assert np.max(np.abs(run.W)) <= 1e-8

    def test_push_weight_underflow_raises(self):
        A_T = np.ascontiguousarray(cycle_matrix(4).T)
        W = np.zeros((4, 2))
        V = np.zeros((4, 2))
        P = np.zeros((4, 2))  # already below the floor; next step must abort
        R = np.zeros((4, 2))
        idx = np.zeros(4, dtype=np.int64)
        with pytest.raises(RuntimeError, match="underflow"):
            backend.indep_coord_step(A_T, W, V, P, R, idx)


class TestEffectiveMatrix:
    def test_all_selected_gives_transpose(self):
        A = cycle_matrix(5)
        draw = selection.SelectionDraw(np.zeros(5, dtype=np.int64),
                                       selection.INDEPENDENT)
        assert np.array_equal(algorithms.effective_matrix(A, draw, 0), A.T)

    def test_none_selected_gives_identity(self):
        A = cycle_matrix(5)
        draw = selection.SelectionDraw(np.ones(5, dtype=np.int64),
                                       selection.INDEPENDENT)
        assert np.array_equal(algorithms.effective_matrix(A, draw, 0), np.eye(5))

    @settings(deadline=None, max_examples=30)
    @given(seed=st.integers(0, 1000))
    def test_column_sums_are_one(self, seed):
        A = cycle_matrix(6)
        d = selection.draw_indices(seed, 1, 6, 4, selection.INDEPENDENT)
        E = algorithms.effective_matrix(A, d, 2)
        assert np.max(np.abs(E.sum(axis=0) - 1.0)) <= 1e-12

    def test_monte_carlo_mean(self):
        K, N, trials = 5, 4, 100_000
        A = cycle_matrix(K)
        rng = np.random.default_rng(99)
        total = np.zeros((K, K))
        for _ in range(trials):
            s = (rng.integers(0, N, K) == 0).astype(float)
            total += np.diag(1.0 - s) + A.T * s
        mean = total / trials
        expected = (1 - 1 / N) * np.eye(K) + (1 / N) * A.T
        # per-entry std of a Bernoulli(1/N) mixture is < 0.5
        se = 3 * 0.5 / np.sqrt(trials)
        assert np.max(np.abs(mean - expected)) <= se


class TestDobrushin:
    def test_averaging_matrix_is_zero(self):
        assert algorithms.dobrushin(np.full((4, 4), 0.25)) == 0.0

    def test_identity_is_one(self):
        assert algorithms.dobrushin(np.eye(2)) == 1.0

    def test_half_mixing_example(self):
        assert algorithms.dobrushin(np.array([[1.0, 0.5], [0.0, 0.5]])) == 0.5

    def test_non_stochastic_rejected(self):
        with pytest.raises(ValueError):
            algorithms.dobrushin(np.array([[0.9, 0.5], [0.0, 0.5]]))
        with pytest.raises(ValueError):
            algorithms.dobrushin(np.array([[1.5, 0.0], [-0.5, 1.0]]))


class TestCheckStop:
    def test_requires_a_step(self):
        run = algorithms.init_run(cycle_matrix(3), signals.StaticSignal(3, 1, 0),
                                  "diffusion")
        with pytest.raises(ValueError):
            algorithms.check_stop(run, 1e-3)

    def test_converged_static_run_flags_everyone(self):
        m = signals.StaticSignal(4, 2, seed=19)
        run = algorithms.init_run(complete_matrix(4), m, "diffusion")
        for _ in range(100):
            run.step()
        assert np.all(algorithms.check_stop(run, 1e-9))

    def test_zero_threshold_on_moving_signal_flags_nobody(self):
        m = signals.DecayingSinusoidRamp(4, 2, seed=20)
        run = algorithms.init_run(cycle_matrix(4), m, "diffusion")
        run.step()
        assert not np.any(algorithms.check_stop(run, 0.0))

    def test_staggered_flagging_and_freezing(self):
        # one agent starts at the network average and flags before the others
        K = 5
        A = cycle_matrix(K)
        vals = np.array([[2.0], [1.0], [0.0], [-1.0], [-2.0]])
        m = signals.FixedSignal(vals)
        run = algorithms.init_run(A, m, "diffusion")
        first_flag = np.full(K, -1)
        for i in range(1, 200):
            run.step()
            flags = algorithms.check_stop(run, 1e-6)
            newly = (first_flag < 0) & flags
            first_flag[newly] = i
            if np.all(first_flag >= 0):
                break
        assert np.all(first_flag >= 0)
        assert len(set(first_flag.tolist())) > 1, "flags should stagger"

    def test_frozen_agent_keeps_its_state(self):
        m = signals.DecayingSinusoidRamp(4, 3, seed=21)
        run = algorithms.init_run(cycle_matrix(4), m, "diffusion")
        run.step()
        run.frozen[2] = True
        snapshot = run.W[2].copy()
        for _ in range(10):
            run.step()
        assert np.array_equal(run.W[2], snapshot)
        assert not np.array_equal(run.W[0], snapshot)


class TestCheckpointAndRunner:
    @pytest.mark.parametrize("alg", algorithms.ALGORITHMS)
    def test_checkpoint_resume_is_bit_exact(self, alg):
        A = cycle_matrix(5)
        m = signals.DecayingSinusoidRamp(5, 4, seed=22)
        run = algorithms.init_run(A, m, alg, seed=8)
        for _ in range(60):
            run.step()
        resumed = algorithms.NetworkRun.from_checkpoint(run.to_checkpoint(), A, m)
        for _ in range(60):
            run.step()
            resumed.step()
        assert np.array_equal(run.W, resumed.W)
        assert run.scalars_sent == resumed.scalars_sent

    @pytest.mark.parametrize("alg", ["sync_coord", "indep_coord",
                                     "indep_coord_nopush"])
    def test_fast_forward_matches_stepwise_bitwise(self, alg):
        A = cycle_matrix(6)
        m = signals.DecayingSinusoidRamp(6, 5, seed=23)
        fast = algorithms.init_run(A, m, alg, seed=9)
        slow = algorithms.init_run(A, m, alg, seed=9)
        algorithms.fast_forward(fast, 137)
        for _ in range(137):
            slow.step()
        assert np.array_equal(fast.W, slow.W)
        assert np.array_equal(fast.V, slow.V)
        if alg == "indep_coord":
            assert np.array_equal(fast.P, slow.P)

    def test_identical_seeds_give_identical_trajectories(self):
        A = cycle_matrix(5)
        m = signals.DecayingSinusoidRamp(5, 3, seed=24)
        a = algorithms.init_run(A, m, "indep_coord", seed=10)
        b = algorithms.init_run(A, m, "indep_coord", seed=10)
        algorithms.fast_forward(a, 500)
        algorithms.fast_forward(b, 500)
        assert np.array_equal(a.W, b.W)

    def test_step_advances_counter_by_one(self):
        run = algorithms.init_run(cycle_matrix(3), signals.StaticSignal(3, 2, 0),
                                  "consensus")
        run.step()
        assert run.iteration == 1


class TestErgodicityHelpers:
    def test_matrix_product_decay_is_decreasing_overall(self):
        A = cycle_matrix(8)
        curve = algorithms.matrix_product_decay(A, 4, [5, 50], trials=50, seed=0)
        assert curve[1] < curve[0]

    def test_dobrushin_rate_estimate_below_one(self):
        A = cycle_matrix(8)
        gamma = algorithms.dobrushin_rate_estimate(A, 4, horizon=40, trials=30,
                                                   seed=1)
        assert 0.0 < gamma < 1.0
