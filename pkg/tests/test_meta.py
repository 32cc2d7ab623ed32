import numpy as np
import pytest

from submeta import (
    Budget,
    DomainError,
    GroundSet,
    ModularObjective,
    SyntheticCoverageObjective,
    apply_two_stage,
    brute_force_meta_opt,
    brute_force_single_opt,
    greedy,
    greedy_train_baseline,
    meta_greedy,
    randomized_meta_greedy,
    replacement_greedy_two_stage,
    run_method_suite,
    task_first_greedy,
    train_first_greedy,
    two_phase_lower_bound,
)
from submeta.data import random_small_instance, synthetic_suite
from submeta.meta import _swap_gains_generic
from submeta.objectives import TaskAverageObjective

from conftest import random_coverage


def identical_modular_tasks(weights, m=3):
    fn = ModularObjective(weights)
    return [fn.clone() for _ in range(m)]


def ordering_gap_fixture():
    """Two tasks where completing tasks first strictly beats the reverse.

    A 'trap' element covers both tasks' big item, winning the first shared
    pick of the train-first ordering; each task then re-covers its big item
    on its own, wasting the shared budget.  The task-first ordering lets the
    tasks claim their big items and spends the shared pick on the genuinely
    complementary element.
    """
    ground = GroundSet(4)  # 0=trap, 1=complement, 2=own-1, 3=own-2
    # Items per task: 0 big (5.0), 1 medium (3.0), 2 bonus (0.1).
    weights = [5.0, 3.0, 0.1]
    task1 = SyntheticCoverageObjective(
        ground, [[0], [1], [0, 2], []], n_items=3, item_weights=weights
    )
    task2 = SyntheticCoverageObjective(
        ground, [[0], [1], [], [0, 2]], n_items=3, item_weights=weights
    )
    return [task1, task2], Budget(2, 1)


class TestTrainFirst:
    def test_single_task_equals_plain_greedy(self):
        tasks, budget = random_small_instance(seed=77)
        fn = tasks[0]
        sol = train_first_greedy([fn], budget)
        trace = greedy(fn, budget=budget.k)
        assert sol.shared.ids + sol.per_task[0].ids == trace.selected
        assert sol.objective == pytest.approx(trace.final_value, abs=1e-9)

    def test_identical_modular_tasks_split_top_weights(self):
        tasks = identical_modular_tasks([5.0, 4.0, 3.0, 2.0, 1.0])
        sol = train_first_greedy(tasks, Budget(4, 2))
        assert sol.shared.ids == (0, 1)
        for per in sol.per_task:
            assert per.ids == (2, 3)

    def test_shared_and_per_task_are_disjoint(self):
        for seed in range(20):
            tasks, budget = random_small_instance(seed=300 + seed)
            sol = train_first_greedy(tasks, budget)
            for per in sol.per_task:
                assert not (sol.shared.as_set() & per.as_set())

    def test_budget_violation_raises(self):
        with pytest.raises(DomainError):
            Budget(2, 2)


class TestTaskFirst:
    def test_identical_modular_tasks_same_union_as_train_first(self):
        tasks = identical_modular_tasks([5.0, 4.0, 3.0, 2.0, 1.0])
        first = train_first_greedy(tasks, Budget(4, 2))
        second = task_first_greedy(tasks, Budget(4, 2))
        union_first = first.shared.as_set() | first.per_task[0].as_set()
        union_second = second.shared.as_set() | second.per_task[0].as_set()
        assert union_first == union_second == {0, 1, 2, 3}

    def test_phase_stat_is_mean_task_value(self):
        tasks, budget = random_small_instance(seed=13)
        sol = task_first_greedy(tasks, budget)
        want = np.mean([fn.evaluate(per) for fn, per in zip(tasks, sol.per_task)])
        assert sol.diagnostics["phase_stat"] == pytest.approx(want, abs=1e-9)


class TestMetaGreedy:
    def test_returns_max_of_both_orderings(self):
        for seed in range(20):
            tasks, budget = random_small_instance(seed=500 + seed)
            first = train_first_greedy(tasks, budget)
            second = task_first_greedy(tasks, budget)
            combined = meta_greedy(tasks, budget)
            assert combined.objective == max(first.objective, second.objective)

    def test_tie_goes_to_train_first(self):
        tasks = identical_modular_tasks([3.0, 2.0, 1.0], m=2)
        sol = meta_greedy(tasks, Budget(2, 1))
        assert sol.method == "train-first"

    def test_task_first_can_win_strictly(self):
        tasks, budget = ordering_gap_fixture()
        first = train_first_greedy(tasks, budget)
        second = task_first_greedy(tasks, budget)
        assert second.objective > first.objective
        combined = meta_greedy(tasks, budget)
        assert combined.method == "task-first"
        assert combined.shared == second.shared
        assert combined.per_task == second.per_task
        # The crafted gap is exactly the bonus item plus the trap's waste.
        assert first.objective == pytest.approx(8.0, abs=1e-12)
        assert second.objective == pytest.approx(8.1, abs=1e-12)

    def test_proposition_bounds_hold(self):
        for seed in range(30):
            tasks, budget = random_small_instance(seed=900 + seed)
            opt = brute_force_meta_opt(tasks, budget).opt_value
            for sol in (
                train_first_greedy(tasks, budget),
                task_first_greedy(tasks, budget),
            ):
                bound = two_phase_lower_bound(sol.diagnostics["phase_stat"], opt)
                assert sol.objective >= bound - 1e-9


class TestRandomizedMetaGreedy:
    def test_seed_reproducibility(self):
        tasks, budget = random_small_instance(seed=31)
        a = randomized_meta_greedy(tasks, budget, seed=123)
        b = randomized_meta_greedy(tasks, budget, seed=123)
        assert a.shared == b.shared
        assert a.per_task == b.per_task
        assert a.objective == b.objective
        assert a.diagnostics["coin_flips"] == b.diagnostics["coin_flips"]

    def test_different_seeds_usually_differ(self):
        tasks, budget = random_small_instance(seed=31)
        flips = {
            tuple(randomized_meta_greedy(tasks, budget, seed=s).diagnostics["coin_flips"])
            for s in range(12)
        }
        assert len(flips) > 1

    def test_budgets_respected(self):
        for seed in range(20):
            tasks, budget = random_small_instance(seed=600 + seed)
            sol = randomized_meta_greedy(tasks, budget, seed=seed)
            assert len(sol.shared) <= budget.l
            for per in sol.per_task:
                assert len(per) <= budget.adapt

    def test_first_flip_probability_matches_l_over_k(self):
        # l = k-1 = 2: shared updates should win about 2/3 of first rounds.
        tasks = identical_modular_tasks([4.0, 3.0, 2.0, 1.0, 0.5], m=1)
        budget = Budget(3, 2)
        hits = 0
        draws = 10_000
        for seed in range(draws):
            sol = randomized_meta_greedy(tasks, budget, seed=seed)
            hits += sol.diagnostics["coin_flips"][0]
        freq = hits / draws
        assert abs(freq - 2 / 3) <= 0.02

    def test_lockstep_growth(self):
        tasks, budget = random_small_instance(seed=44)
        sol = randomized_meta_greedy(tasks, budget, seed=7)
        sizes = {len(per) for per in sol.per_task}
        assert len(sizes) == 1


class TestGreedyTrainBaseline:
    def test_single_task_equals_greedy(self):
        fn = random_coverage(3)
        chosen = greedy_train_baseline([fn], 4)
        assert chosen.ids == greedy(fn.clone(), budget=4).selected

    def test_identical_tasks_equal_per_task_greedy(self):
        tasks = identical_modular_tasks([5.0, 1.0, 4.0, 2.0])
        chosen = greedy_train_baseline(tasks, 2)
        assert chosen.as_set() == {0, 2}

    def test_ratio_on_average_objective(self):
        for seed in range(10):
            tasks, budget = random_small_instance(seed=700 + seed)
            chosen = greedy_train_baseline(tasks, budget.k)
            avg = TaskAverageObjective(tasks)
            opt, _ = brute_force_single_opt(avg, budget.k)
            assert avg.evaluate(chosen) >= (1 - np.exp(-1)) * opt - 1e-9

    def test_k_bounds(self):
        fn = random_coverage(0, n=5)
        with pytest.raises(DomainError):
            greedy_train_baseline([fn], 6)


def brute_force_two_stage(tasks, q, k):
    """Independent exact optimum of the reduced-ground-set problem:
    max over |S| <= q of sum_i max_{T_i subset of S, |T_i| <= k} f_i(T_i)."""
    from itertools import combinations

    n = tasks[0].ground.n
    best = -np.inf
    for reduced in combinations(range(n), q):
        total = 0.0
        for fn in tasks:
            task_best = 0.0
            for size in range(min(k, q) + 1):
                for sub in combinations(reduced, size):
                    task_best = max(task_best, fn.evaluate(list(sub)))
            total += task_best
        best = max(best, total / len(tasks))
    return best


class TestReplacementGreedy:
    def test_q_equals_k_single_task_is_plain_greedy(self):
        fn = random_coverage(17, n=8)
        art = replacement_greedy_two_stage([fn], q=3, k=3)
        trace = greedy(fn.clone(), budget=3)
        assert art.per_task[0].as_set() == set(trace.selected)
        assert art.objective == pytest.approx(trace.final_value, abs=1e-9)

    def test_full_q_makes_restriction_vacuous(self):
        fns = [random_coverage(s, n=8) for s in (20, 21)]
        art = replacement_greedy_two_stage(fns, q=8, k=3)
        for fn in fns:
            _, restricted_value, _ = apply_two_stage(art, fn, 3)
            free_value = greedy(fn, budget=3).final_value
            assert restricted_value == pytest.approx(free_value, abs=1e-9)

    def test_training_objective_beats_half_e2_bound(self):
        factor = 0.5 * (1 - np.exp(-2))
        rng = np.random.default_rng(5)
        for seed in range(8):
            fns = [random_coverage(800 + seed * 3 + j, n=7, n_items=12) for j in range(2)]
            q, k = 4, 2
            art = replacement_greedy_two_stage(fns, q=q, k=k)
            opt = brute_force_two_stage(fns, q, k)
            assert art.objective >= factor * opt - 1e-9

    def test_swap_gains_generic_matches_kernel(self):
        fn = random_coverage(33, n=9)
        state = fn.start_state()
        current = [1, 4, 7]
        for e in current:
            state.add(e)
        cands = np.asarray([0, 2, 3, 5, 6, 8], dtype=np.intp)
        kernel_gains, kernel_victims = state.swap_scan(cands)
        generic_gains, generic_victims = _swap_gains_generic(
            fn, current, state.value, cands
        )
        assert kernel_gains == pytest.approx(generic_gains, abs=1e-9)
        # A reported victim must actually deliver the claimed improvement
        # (victims behind zero gains are never applied, so they may differ).
        base = fn.evaluate(current)
        for gains, victims in ((kernel_gains, kernel_victims), (generic_gains, generic_victims)):
            for j, e in enumerate(cands):
                if gains[j] > 1e-9:
                    swapped = [m for m in current if m != victims[j]] + [int(e)]
                    assert fn.evaluate(swapped) - base == pytest.approx(
                        gains[j], abs=1e-9
                    )

    def test_parameter_validation(self):
        fn = random_coverage(0, n=5)
        with pytest.raises(DomainError):
            replacement_greedy_two_stage([fn], q=6, k=2)
        with pytest.raises(DomainError):
            replacement_greedy_two_stage([fn], q=2, k=3)

    def test_reduced_budget_is_upper_bound(self):
        fn = random_coverage(2, n=6, n_items=4, density=0.5)
        art = replacement_greedy_two_stage([fn], q=6, k=2)
        assert len(art.reduced) <= 6


class TestRunMethodSuite:
    @pytest.fixture(scope="class")
    def small_suite(self):
        return synthetic_suite("rideshare-like", n=40, m_train=4, m_test=4, seed=2)

    def test_greedy_test_normalizes_to_one(self, small_suite):
        res = run_method_suite(
            small_suite.train_tasks,
            small_suite.test_tasks,
            Budget(5, 3),
            seed=0,
            methods=["greedy-test"],
        )
        assert res["greedy-test"].normalized == 1.0

    def test_test_call_bounds(self, small_suite):
        n, k, l = 40, 5, 3
        res = run_method_suite(
            small_suite.train_tasks,
            small_suite.test_tasks,
            Budget(k, l),
            q=10,
            seed=0,
        )
        assert res["meta-greedy"].test_calls_per_task <= 2 * (k - l) * n + (k - l)
        assert res["greedy-test"].test_calls_per_task <= 2 * k * n + k
        assert res["greedy-train"].test_calls_per_task == 1.0
        assert res["random"].test_calls_per_task == 1.0

    def test_deterministic_across_runs(self, small_suite):
        kwargs = dict(budget=Budget(5, 3), q=10, seed=3)
        a = run_method_suite(small_suite.train_tasks, small_suite.test_tasks, **kwargs)
        b = run_method_suite(small_suite.train_tasks, small_suite.test_tasks, **kwargs)
        for name in a:
            assert a[name].avg_value == b[name].avg_value
            assert a[name].test_calls_per_task == b[name].test_calls_per_task

    def test_unknown_method_rejected(self, small_suite):
        with pytest.raises(DomainError):
            run_method_suite(
                small_suite.train_tasks,
                small_suite.test_tasks,
                Budget(5, 3),
                methods=["nonsense"],
            )

    def test_two_stage_requires_q(self, small_suite):
        with pytest.raises(DomainError):
            run_method_suite(
                small_suite.train_tasks,
                small_suite.test_tasks,
                Budget(5, 3),
                methods=["replacement-greedy"],
            )

    def test_empty_task_lists_rejected(self, small_suite):
        with pytest.raises(DomainError):
            run_method_suite([], small_suite.test_tasks, Budget(5, 3))
