"""Cardinality-constrained greedy engines: classic scan, lazy (priority
queue) scan, test-time completion of a trained set, and seeded random
selection.

Conventions shared by both engines:

* candidates are the elements outside ``initial``, ``exclude``, and earlier
  picks;
* the element with the largest marginal gain wins, ties broken by the
  smallest element id (exact float comparison);
* selection stops early once the best gain is ≤ 0, so budgets are upper
  bounds;
* call accounting: 1 to seed the working-set value, then 1 per candidate
  probe, which bounds a budget-B run by 1 + B·n calls.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import Budget, DomainError, ElementSet, EvalState, GroundSet, SetFunction

__all__ = [
    "GreedyTrace",
    "greedy",
    "lazy_greedy",
    "complete_at_test",
    "random_select",
]


@dataclass
class GreedyTrace:
    """Replayable record of one greedy run."""

    picks: list[tuple[int, float]]
    final_value: float
    calls: int

    @property
    def selected(self) -> tuple[int, ...]:
        return tuple(e for e, _ in self.picks)


def _candidate_mask(
    ground: GroundSet,
    initial: "ElementSet | Sequence[int] | None",
    exclude: "ElementSet | Sequence[int] | None",
) -> np.ndarray:
    mask = np.ones(ground.n, dtype=bool)
    for group in (initial, exclude):
        if group is not None:
            for e in group:
                mask[ground.require_valid(e)] = False
    return mask


def _classic_rounds(
    state: EvalState, mask: np.ndarray, budget: int
) -> list[tuple[int, float]]:
    picks: list[tuple[int, float]] = []
    for _ in range(budget):
        cands = np.flatnonzero(mask)
        if cands.size == 0:
            break
        gains = state.gains(cands)
        i = int(np.argmax(gains))
        best = float(gains[i])
        if best <= 0.0:
            break
        e = int(cands[i])
        state.add(e, best)
        mask[e] = False
        picks.append((e, best))
    return picks


def _lazy_rounds(
    state: EvalState, mask: np.ndarray, budget: int
) -> list[tuple[int, float]]:
    """Stale-bound pruning; valid only when gains never grow (submodular).

    Heap entries are (−gain, id, round-stamp); an entry popped with the
    current stamp holds the true argmax, because every other key is an upper
    bound on its element's present gain.
    """
    picks: list[tuple[int, float]] = []
    if budget <= 0:
        return picks
    cands = np.flatnonzero(mask)
    if cands.size == 0:
        return picks
    gains = state.gains(cands)
    heap = [(-float(g), int(e), 0) for g, e in zip(gains, cands)]
    heapq.heapify(heap)
    prev_gain = np.inf
    while heap and len(picks) < budget:
        neg, e, stamp = heapq.heappop(heap)
        if not mask[e]:
            continue
        if stamp == len(picks):
            best = -neg
            if best <= 0.0:
                break
            if best > prev_gain + 1e-9:
                raise DomainError(
                    "gain increased during lazy selection; the objective is "
                    "not submodular on this trajectory"
                )
            prev_gain = best
            state.add(e, best)
            mask[e] = False
            picks.append((e, best))
        else:
            fresh = float(state.gains(np.asarray([e], dtype=np.intp))[0])
            heapq.heappush(heap, (-fresh, e, len(picks)))
    return picks


def _run(
    fn: SetFunction,
    initial,
    budget: int,
    exclude,
    lazy: bool,
) -> GreedyTrace:
    if budget < 0:
        raise DomainError("budget must be >= 0")
    before = fn.calls
    state = fn.start_state(initial)
    mask = _candidate_mask(fn.ground, initial, exclude)
    rounds = _lazy_rounds if lazy else _classic_rounds
    picks = rounds(state, mask, budget)
    return GreedyTrace(picks=picks, final_value=state.value, calls=fn.calls - before)


def greedy(
    fn: SetFunction,
    initial: "ElementSet | Sequence[int] | None" = None,
    budget: int = 0,
    exclude: "ElementSet | Sequence[int] | None" = None,
) -> GreedyTrace:
    """Classic greedy: full candidate scan every round."""
    return _run(fn, initial, budget, exclude, lazy=False)


def lazy_greedy(
    fn: SetFunction,
    initial: "ElementSet | Sequence[int] | None" = None,
    budget: int = 0,
    exclude: "ElementSet | Sequence[int] | None" = None,
) -> GreedyTrace:
    """Priority-queue greedy; identical picks to :func:`greedy` on submodular
    objectives, usually at a fraction of the oracle calls.  Callers declare
    submodularity by choosing this engine."""
    return _run(fn, initial, budget, exclude, lazy=True)


def complete_at_test(
    fn_test: SetFunction,
    shared: ElementSet,
    budget_k: int,
    budget_l: int,
) -> tuple[ElementSet, float, int]:
    """Extend a trained set with k − l greedy picks on the revealed task.

    Returns the completed set, its value, and the oracle calls spent, which
    is at most 1 + (k − l)·n.
    """
    Budget(budget_k, budget_l).validate_for(fn_test.ground)
    if len(shared) > budget_l:
        raise DomainError(
            f"trained set has {len(shared)} elements, budget l={budget_l}"
        )
    trace = greedy(fn_test, initial=shared, budget=budget_k - budget_l)
    completed = shared.union(trace.selected)
    return completed, trace.final_value, trace.calls


def random_select(
    ground: GroundSet,
    budget: int,
    seed: "int | np.random.Generator | np.random.SeedSequence",
) -> ElementSet:
    """Uniform sample of ``budget`` distinct elements, reproducible by seed."""
    if not 0 <= budget <= ground.n:
        raise DomainError(f"budget {budget} not in [0, {ground.n}]")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    ids = rng.choice(ground.n, size=budget, replace=False)
    return ElementSet(ground, (int(e) for e in ids))
