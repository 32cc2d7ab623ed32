"""Training-phase algorithms: the two deterministic greedy orderings and
their best-of-both combination (meta-greedy), the randomized interleaving,
the all-at-train baseline, the two-stage reduced-ground-set baseline with
add-or-swap updates, and a method-comparison harness.

All training operations consume a list of task oracles sharing one ground
set and produce artifacts whose shared set can be handed to
:func:`submeta.greedy.complete_at_test`.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import Budget, DomainError, ElementSet, GroundSet, MetaSolution, SetFunction
from .greedy import _classic_rounds, _lazy_rounds, complete_at_test, greedy, random_select
from .objectives import TaskAverageObjective, _RowMaxState

__all__ = [
    "TrainedInitializer",
    "TwoStageArtifact",
    "MethodResult",
    "train_first_greedy",
    "task_first_greedy",
    "meta_greedy",
    "randomized_meta_greedy",
    "greedy_train_baseline",
    "replacement_greedy_two_stage",
    "apply_two_stage",
    "run_method_suite",
    "METHOD_NAMES",
]


@dataclass
class TrainedInitializer:
    """A trained shared set ready for test-time completion."""

    shared: ElementSet
    method: str
    train_calls: int
    solution: Optional[MetaSolution] = None


@dataclass
class TwoStageArtifact:
    """Reduced ground set learned offline, plus per-task working sets."""

    reduced: ElementSet
    per_task: list[ElementSet]
    objective: float
    train_calls: int


def _common_ground(tasks: Sequence[SetFunction]) -> GroundSet:
    if not tasks:
        raise DomainError("need at least one task")
    ground = tasks[0].ground
    for fn in tasks:
        if fn.ground.n != ground.n:
            raise DomainError("tasks disagree on ground-set size")
    return ground


def _shared_round(states, mask: np.ndarray, require_positive: bool):
    """One shared-set pick maximizing the summed marginal gain.

    Returns (element, per-task gains) or None when no candidate remains or,
    with ``require_positive``, when the best summed gain is ≤ 0.
    """
    cands = np.flatnonzero(mask)
    if cands.size == 0:
        return None
    per_task = [st.gains(cands) for st in states]
    total = per_task[0].copy()
    for g in per_task[1:]:
        total += g
    i = int(np.argmax(total))
    if require_positive and total[i] <= 0.0:
        return None
    e = int(cands[i])
    return e, [float(g[i]) for g in per_task]


def train_first_greedy(tasks: Sequence[SetFunction], budget: Budget) -> MetaSolution:
    """Fill the shared set first (summed gains), then complete each task.

    With a single task this is plain greedy with budget k: the shared rounds
    and the per-task rounds optimize the same function in sequence.
    """
    ground = _common_ground(tasks)
    budget.validate_for(ground)
    states = [fn.start_state() for fn in tasks]
    shared = ElementSet(ground)
    mask = np.ones(ground.n, dtype=bool)
    for _ in range(budget.l):
        pick = _shared_round(states, mask, require_positive=True)
        if pick is None:
            break
        e, gains = pick
        shared.add(e)
        mask[e] = False
        for st, g in zip(states, gains):
            st.add(e, g)
    phase_stat = float(np.mean([st.value for st in states]))
    per_task: list[ElementSet] = []
    for st in states:
        task_mask = mask.copy()
        picks = _lazy_rounds(st, task_mask, budget.adapt)
        per_task.append(ElementSet(ground, (e for e, _ in picks)))
    objective = float(np.mean([st.value for st in states]))
    return MetaSolution(
        shared=shared,
        per_task=per_task,
        objective=objective,
        method="train-first",
        diagnostics={"phase_stat": phase_stat},
    )


def task_first_greedy(tasks: Sequence[SetFunction], budget: Budget) -> MetaSolution:
    """Complete each task from scratch first, then fill the shared set.

    The shared rounds condition every gain on that task's existing picks, so
    a shared pick may coincide with some task's own element; only the shared
    set itself is kept duplicate-free.
    """
    ground = _common_ground(tasks)
    budget.validate_for(ground)
    states = [fn.start_state() for fn in tasks]
    per_task: list[ElementSet] = []
    for st in states:
        task_mask = np.ones(ground.n, dtype=bool)
        picks = _lazy_rounds(st, task_mask, budget.adapt)
        per_task.append(ElementSet(ground, (e for e, _ in picks)))
    phase_stat = float(np.mean([st.value for st in states]))
    shared = ElementSet(ground)
    mask = np.ones(ground.n, dtype=bool)
    for _ in range(budget.l):
        pick = _shared_round(states, mask, require_positive=True)
        if pick is None:
            break
        e, gains = pick
        shared.add(e)
        mask[e] = False
        for st, g in zip(states, gains):
            st.add(e, g)
    objective = float(np.mean([st.value for st in states]))
    return MetaSolution(
        shared=shared,
        per_task=per_task,
        objective=objective,
        method="task-first",
        diagnostics={"phase_stat": phase_stat},
    )


def meta_greedy(tasks: Sequence[SetFunction], budget: Budget) -> MetaSolution:
    """Run both orderings and keep the one with the higher objective.

    Ties go to the train-first ordering.  The returned solution is the
    winner's, with both objectives recorded in the diagnostics.
    """
    first = train_first_greedy(tasks, budget)
    second = task_first_greedy(tasks, budget)
    winner = second if second.objective > first.objective else first
    winner.diagnostics = dict(winner.diagnostics)
    winner.diagnostics.update(
        {
            "winner": winner.method,
            "train_first_objective": first.objective,
            "task_first_objective": second.objective,
        }
    )
    return winner


def randomized_meta_greedy(
    tasks: Sequence[SetFunction],
    budget: Budget,
    seed: "int | np.random.SeedSequence | np.random.Generator",
) -> MetaSolution:
    """Coin-flip interleaving: each round updates the shared set with
    probability l/k, otherwise every per-task set, until one side fills;
    the other side is then completed greedily.

    All per-task sets grow in lockstep during the coin-flip phase.  The PRNG
    is consumed strictly sequentially, one draw per round, so a fixed seed
    reproduces the solution exactly.
    """
    ground = _common_ground(tasks)
    budget.validate_for(ground)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    states = [fn.start_state() for fn in tasks]
    shared = ElementSet(ground)
    per_task = [ElementSet(ground) for _ in tasks]
    shared_mask = np.ones(ground.n, dtype=bool)
    coin_flips: list[bool] = []
    p_shared = budget.l / budget.k
    while len(per_task[0]) < budget.adapt and len(shared) < budget.l:
        cands = np.flatnonzero(shared_mask)
        gains = [st.gains(cands) for st in states]
        total = gains[0].copy()
        for g in gains[1:]:
            total += g
        shared_pick = int(np.argmax(total))
        task_picks = []
        for i, g in enumerate(gains):
            eligible = np.fromiter(
                (int(e) not in per_task[i] for e in cands), dtype=bool, count=len(cands)
            )
            masked = np.where(eligible, g, -np.inf)
            task_picks.append(int(np.argmax(masked)))
        take_shared = bool(rng.random() < p_shared)
        coin_flips.append(take_shared)
        if take_shared:
            e = int(cands[shared_pick])
            shared.add(e)
            shared_mask[e] = False
            for st, g in zip(states, gains):
                st.add(e, float(g[shared_pick]))
        else:
            for i, (st, g) in enumerate(zip(states, gains)):
                j = task_picks[i]
                e = int(cands[j])
                per_task[i].add(e)
                st.add(e, float(g[j]))
    # Completion of whichever side stopped short, plain greedy with early stop.
    while len(shared) < budget.l:
        pick = _shared_round(states, shared_mask, require_positive=True)
        if pick is None:
            break
        e, gains_at_pick = pick
        shared.add(e)
        shared_mask[e] = False
        for st, g in zip(states, gains_at_pick):
            st.add(e, g)
    for i, st in enumerate(states):
        want = budget.adapt - len(per_task[i])
        if want > 0:
            task_mask = shared_mask.copy()
            for e in per_task[i]:
                task_mask[e] = False
            picks = _lazy_rounds(st, task_mask, want)
            for e, _ in picks:
                per_task[i].add(e)
    objective = float(np.mean([st.value for st in states]))
    return MetaSolution(
        shared=shared,
        per_task=per_task,
        objective=objective,
        method="randomized-meta-greedy",
        diagnostics={"coin_flips": coin_flips},
    )


def greedy_train_baseline(tasks: Sequence[SetFunction], k: int) -> ElementSet:
    """Plain greedy with the full budget on the across-task average; used at
    test time with zero adaptation."""
    ground = _common_ground(tasks)
    if not 1 <= k <= ground.n:
        raise DomainError(f"k={k} not in [1, {ground.n}]")
    avg = TaskAverageObjective(list(tasks))
    trace = greedy(avg, budget=k)
    return ElementSet(ground, trace.selected)


def _swap_gains_generic(
    fn: SetFunction, current: list[int], cur_value: float, cands: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Eval-difference add-or-swap scan for oracles without a fast path."""
    members = sorted(current)
    gains = np.zeros(len(cands))
    victims = np.zeros(len(cands), dtype=np.intp)
    for j, e in enumerate(cands):
        best, best_x = 0.0, members[0]
        for x in members:
            swapped = [m for m in members if m != x] + [int(e)]
            fn._charge(1)
            delta = float(fn._value(np.asarray(swapped, dtype=np.intp))) - cur_value
            if delta > best:
                best, best_x = delta, x
        gains[j] = best
        victims[j] = best_x
    return gains, victims


def replacement_greedy_two_stage(
    tasks: Sequence[SetFunction], q: int, k: int
) -> TwoStageArtifact:
    """Learn a reduced ground set of size ≤ q by add-or-swap rounds.

    Each round scores every remaining element by the summed per-task
    improvement: the plain marginal while a task's working set is below k,
    afterwards the best non-negative swap.  The winner joins the reduced
    set and every task with a strictly positive improvement applies its
    add-or-swap.  Swap-victim ties go to the smallest element id.
    """
    ground = _common_ground(tasks)
    if not 1 <= k <= q <= ground.n:
        raise DomainError(f"need 1 <= k <= q <= n, got k={k}, q={q}, n={ground.n}")
    before = [fn.calls for fn in tasks]
    states = [fn.start_state() for fn in tasks]
    task_sets: list[list[int]] = [[] for _ in tasks]
    reduced = ElementSet(ground)
    available = np.ones(ground.n, dtype=bool)
    for _ in range(q):
        cands = np.flatnonzero(available)
        if cands.size == 0:
            break
        total = np.zeros(len(cands))
        actions = []
        for i, st in enumerate(states):
            if len(task_sets[i]) < k:
                g = st.gains(cands)
                actions.append(("add", g, None))
            else:
                if isinstance(st, _RowMaxState):
                    g, victims = st.swap_scan(cands)
                else:
                    g, victims = _swap_gains_generic(
                        tasks[i], task_sets[i], st.value, cands
                    )
                actions.append(("swap", g, victims))
            total += np.maximum(g, 0.0)
        j = int(np.argmax(total))
        if total[j] <= 0.0:
            break
        e = int(cands[j])
        reduced.add(e)
        available[e] = False
        for i, (kind, g, victims) in enumerate(actions):
            if g[j] <= 0.0:
                continue
            if kind == "add":
                states[i].add(e, float(g[j]))
                task_sets[i].append(e)
            else:
                x = int(victims[j])
                states[i].remove(x)
                states[i].add(e)
                task_sets[i].remove(x)
                task_sets[i].append(e)
    objective = float(np.mean([st.value for st in states]))
    train_calls = sum(fn.calls - b for fn, b in zip(tasks, before))
    return TwoStageArtifact(
        reduced=reduced,
        per_task=[ElementSet(ground, s) for s in task_sets],
        objective=objective,
        train_calls=train_calls,
    )


def apply_two_stage(
    artifact: TwoStageArtifact, fn_test: SetFunction, k: int
) -> tuple[ElementSet, float, int]:
    """Greedy with budget k restricted to the learned reduced ground set."""
    outside = [e for e in range(fn_test.ground.n) if e not in artifact.reduced]
    trace = greedy(fn_test, budget=k, exclude=outside)
    return ElementSet(fn_test.ground, trace.selected), trace.final_value, trace.calls


METHOD_NAMES = (
    "greedy-test",
    "meta-greedy",
    "randomized-meta-greedy",
    "greedy-train",
    "random",
    "replacement-greedy",
)


@dataclass
class MethodResult:
    """Per-method aggregate over the test tasks of one suite run."""

    method: str
    avg_value: float
    normalized: float
    train_calls: int
    test_calls_per_task: float
    wall_ms: float
    values: list[float] = field(default_factory=list)


def _measured(fn_test: SetFunction, apply) -> tuple[float, int]:
    before = fn_test.calls
    value = apply(fn_test)
    return value, fn_test.calls - before


def run_method_suite(
    train_tasks: Sequence[SetFunction],
    test_tasks: Sequence[SetFunction],
    budget: Budget,
    q: Optional[int] = None,
    seed: int = 0,
    methods: Optional[Sequence[str]] = None,
) -> dict[str, MethodResult]:
    """Train each method once, apply it to every test task, and report
    averages normalized against the full-greedy-at-test anchor.

    The anchor is always computed even when ``greedy-test`` is not in
    ``methods``.  ``q`` is required for the two-stage method.  The per-method
    training calls count underlying task evaluations; the averaged objective
    used by ``greedy-train`` therefore multiplies its trace count by m.
    """
    if not train_tasks or not test_tasks:
        raise DomainError("need non-empty train and test task lists")
    ground = _common_ground(list(train_tasks) + list(test_tasks))
    budget.validate_for(ground)
    if methods is None:
        methods = [m for m in METHOD_NAMES if m != "replacement-greedy" or q]
    unknown = set(methods) - set(METHOD_NAMES)
    if unknown:
        raise DomainError(f"unknown methods: {sorted(unknown)}")
    if "replacement-greedy" in methods and not q:
        raise DomainError("replacement-greedy needs a reduced-set size q")

    def train_call_total(body):
        for fn in train_tasks:
            fn.reset_calls()
        start = time.perf_counter()
        out = body()
        wall = (time.perf_counter() - start) * 1000.0
        return out, sum(fn.calls for fn in train_tasks), wall

    trained: dict[str, tuple] = {}
    for name in dict.fromkeys(list(methods) + ["greedy-test"]):
        if name == "meta-greedy":
            sol, calls, wall = train_call_total(lambda: meta_greedy(train_tasks, budget))
            trained[name] = (sol.shared, calls, wall)
        elif name == "randomized-meta-greedy":
            rng_seed = np.random.SeedSequence([seed, 11])
            sol, calls, wall = train_call_total(
                lambda: randomized_meta_greedy(train_tasks, budget, rng_seed)
            )
            trained[name] = (sol.shared, calls, wall)
        elif name == "greedy-train":
            avg = TaskAverageObjective(list(train_tasks))
            start = time.perf_counter()
            trace = greedy(avg, budget=budget.k)
            wall = (time.perf_counter() - start) * 1000.0
            trained[name] = (
                ElementSet(ground, trace.selected),
                trace.calls * len(train_tasks),
                wall,
            )
        elif name == "random":
            rng = np.random.default_rng(np.random.SeedSequence([seed, 23]))
            start = time.perf_counter()
            chosen = random_select(ground, budget.k, rng)
            wall = (time.perf_counter() - start) * 1000.0
            trained[name] = (chosen, 0, wall)
        elif name == "replacement-greedy":
            artifact, calls, wall = train_call_total(
                lambda: replacement_greedy_two_stage(train_tasks, q, budget.k)
            )
            trained[name] = (artifact, calls, wall)
        elif name == "greedy-test":
            trained[name] = (None, 0, 0.0)

    results: dict[str, MethodResult] = {}
    anchor_values: list[float] = []
    for name, (art, train_calls, train_wall) in trained.items():
        values: list[float] = []
        call_counts: list[int] = []
        start = time.perf_counter()
        for fn in test_tasks:
            before = fn.calls
            if name == "greedy-test":
                value = greedy(fn, budget=budget.k).final_value
            elif name in ("meta-greedy", "randomized-meta-greedy"):
                _, value, _ = complete_at_test(fn, art, budget.k, budget.l)
            elif name in ("greedy-train", "random"):
                value = fn.evaluate(art)
            else:
                _, value, _ = apply_two_stage(art, fn, budget.k)
            values.append(float(value))
            call_counts.append(fn.calls - before)
        wall = train_wall + (time.perf_counter() - start) * 1000.0
        avg = float(np.mean(values))
        if name == "greedy-test":
            anchor_values = values
        results[name] = MethodResult(
            method=name,
            avg_value=avg,
            normalized=np.nan,
            train_calls=int(train_calls),
            test_calls_per_task=float(np.mean(call_counts)),
            wall_ms=wall,
            values=values,
        )
    anchor = float(np.mean(anchor_values))
    for res in results.values():
        res.normalized = res.avg_value / anchor if anchor > 0 else np.nan
    return {name: results[name] for name in methods}
