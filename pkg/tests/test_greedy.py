import numpy as np
import pytest

from submeta import (
    Budget,
    DomainError,
    ElementSet,
    GroundSet,
    ModularObjective,
    SyntheticCoverageObjective,
    complete_at_test,
    greedy,
    lazy_greedy,
    random_select,
)
from submeta.data import random_small_instance
from submeta.verify import brute_force_single_opt

from conftest import random_coverage


class TestClassicGreedy:
    def test_modular_argmax(self, modular_abc):
        trace = greedy(modular_abc, budget=2)
        assert trace.selected == (0, 1)
        assert trace.final_value == 5.0

    def test_budget_zero_is_noop(self, modular_abc):
        trace = greedy(modular_abc, initial=[2], budget=0)
        assert trace.picks == []
        assert trace.final_value == 1.0
        assert trace.calls == 1

    def test_budget_clamps_beyond_ground(self, modular_abc):
        trace = greedy(modular_abc, budget=10)
        assert trace.selected == (0, 1, 2)

    def test_early_stop_on_zero_gain(self):
        # Element 2 covers nothing: once 0 and 1 are in, gains are zero.
        ground = GroundSet(3)
        fn = SyntheticCoverageObjective(ground, [[0], [1], []], n_items=2)
        trace = greedy(fn, budget=3)
        assert trace.selected == (0, 1)

    def test_exclude_is_respected(self, modular_abc):
        trace = greedy(modular_abc, budget=2, exclude=[0])
        assert trace.selected == (1, 2)

    def test_ratio_against_brute_force(self):
        threshold = 1 - np.exp(-1)
        for seed in range(30):
            fn = random_coverage(seed, n=10)
            trace = greedy(fn, budget=3)
            opt, _ = brute_force_single_opt(fn, 3)
            assert trace.final_value >= threshold * opt - 1e-9

    def test_final_value_matches_fresh_eval(self):
        for seed in range(10):
            fn = random_coverage(seed)
            trace = greedy(fn, budget=4)
            assert trace.final_value == pytest.approx(
                fn.evaluate(list(trace.selected)), abs=1e-9
            )

    def test_gains_non_increasing_on_submodular(self):
        for seed in range(10):
            fn = random_coverage(seed)
            trace = greedy(fn, budget=5)
            gains = [g for _, g in trace.picks]
            assert all(a >= b - 1e-9 for a, b in zip(gains, gains[1:]))


class TestTieBreaking:
    def test_duplicate_elements_pick_smallest_id(self):
        # Elements 1 and 3 are identical; 1 must win its tie.
        ground = GroundSet(4)
        fn = SyntheticCoverageObjective(
            ground, [[0], [1, 2], [0, 1], [1, 2]], n_items=3
        )
        trace = greedy(fn, budget=2)
        assert 1 in trace.selected
        assert 3 not in trace.selected

    def test_storage_permutation_does_not_change_picks(self):
        # Same objective, item rows listed in a different order.
        ground = GroundSet(5)
        covers = [[0, 1], [2], [0, 3], [4], [1, 2, 3]]
        weights = [1.0, 2.0, 0.5, 1.5, 1.0]
        fn1 = SyntheticCoverageObjective(ground, covers, 5, weights)
        perm = [3, 1, 4, 0, 2]
        covers_p = [[perm.index(i) for i in c] for c in covers]
        weights_p = [weights[perm[j]] for j in range(5)]
        fn2 = SyntheticCoverageObjective(ground, covers_p, 5, weights_p)
        t1, t2 = greedy(fn1, budget=3), greedy(fn2, budget=3)
        assert t1.selected == t2.selected


class TestLazyGreedy:
    def test_identical_picks_on_random_fixtures(self):
        for seed in range(50):
            tasks, budget = random_small_instance(seed=4000 + seed)
            fn = tasks[0]
            classic = greedy(fn, budget=budget.k)
            lazy = lazy_greedy(fn, budget=budget.k)
            assert classic.picks == lazy.picks
            assert lazy.calls <= classic.calls

    def test_modular_uses_fewer_calls(self):
        fn = ModularObjective(np.arange(1.0, 21.0))
        classic = greedy(fn, budget=5)
        lazy = lazy_greedy(fn, budget=5)
        assert lazy.picks == classic.picks
        assert lazy.calls < classic.calls

    def test_budget_zero(self, modular_abc):
        trace = lazy_greedy(modular_abc, initial=[0], budget=0)
        assert trace.final_value == 3.0
        assert trace.picks == []


class TestCompleteAtTest:
    def test_single_round_when_l_is_k_minus_one(self):
        fn = random_coverage(1, n=8)
        shared = ElementSet(fn.ground, [0, 1])
        fn.reset_calls()
        completed, value, calls = complete_at_test(fn, shared, 3, 2)
        assert len(completed) <= 3
        assert calls == 1 + (8 - 2)  # one scan over the six remaining elements
        assert value >= fn.evaluate(shared) - 1e-9

    def test_budget_l_zero_is_rejected(self):
        fn = random_coverage(1)
        with pytest.raises(DomainError):
            complete_at_test(fn, ElementSet(fn.ground), 3, 0)

    def test_oversized_trained_set_is_rejected(self):
        fn = random_coverage(1)
        shared = ElementSet(fn.ground, [0, 1, 2])
        with pytest.raises(DomainError):
            complete_at_test(fn, shared, 3, 2)

    def test_l_must_be_strictly_below_k(self):
        fn = random_coverage(1)
        with pytest.raises(DomainError):
            complete_at_test(fn, ElementSet(fn.ground, [0]), 2, 2)

    def test_monotone_augmentation(self):
        for seed in range(5):
            fn = random_coverage(seed, n=9)
            shared = ElementSet(fn.ground, [0])
            _, value, _ = complete_at_test(fn, shared, 3, 1)
            assert value >= fn.evaluate(shared) - 1e-9


class TestRandomSelect:
    def test_same_seed_same_set(self):
        g = GroundSet(30)
        assert random_select(g, 5, seed=9).ids == random_select(g, 5, seed=9).ids

    def test_full_budget_returns_whole_ground(self):
        g = GroundSet(6)
        assert random_select(g, 6, seed=0).as_set() == frozenset(range(6))

    def test_over_budget_rejected(self):
        with pytest.raises(DomainError):
            random_select(GroundSet(4), 5, seed=0)

    def test_single_pick_frequencies_are_uniform(self):
        g = GroundSet(10)
        counts = np.zeros(10)
        draws = 10_000
        for seed in range(draws):
            counts[random_select(g, 1, seed=seed).ids[0]] += 1
        chi2 = ((counts - draws / 10) ** 2 / (draws / 10)).sum()
        assert chi2 < 27.88  # 0.001 significance at 9 degrees of freedom
        assert np.abs(counts / draws - 0.1).max() < 0.01
