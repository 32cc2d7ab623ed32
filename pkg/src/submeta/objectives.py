"""Concrete monotone set functions: facility location on convenience scores,
genre-weighted movie recommendation, task averages, union-of-rectangles area
coverage, plus modular and item-coverage fixtures.

All shipped objectives satisfy f(∅) = 0 and the empty max convention
max over ∅ = 0, which keeps them monotone with non-negative range.
"""

from __future__ import annotations

from itertools import combinations
from math import comb
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .core import (
    DomainError,
    ElementSet,
    EvalState,
    GroundSet,
    SetFunction,
    _as_id_array,
)

__all__ = [
    "convenience_score",
    "FacilityLocationObjective",
    "RecommendationObjective",
    "TaskAverageObjective",
    "AreaCoverageObjective",
    "ModularObjective",
    "SyntheticCoverageObjective",
    "build_counterexample",
    "best_augmentation_value",
    "BestAugmentationObjective",
    "COUNTEREXAMPLE_LABELS",
]


def convenience_score(u: Sequence[float], r: Sequence[float]) -> float:
    """Customer/driver convenience 2 − 2/(1 + e^(−200·d)), d = Manhattan distance.

    Lives in [0, 1]: exactly 1 at d = 0, vanishing as d grows.  Coordinates are
    taken at face value (degree-scale inputs are what the 200 constant expects).
    """
    d = abs(u[0] - r[0]) + abs(u[1] - r[1])
    return 2.0 - 2.0 / (1.0 + np.exp(-200.0 * d))


def _score_matrix(customers: np.ndarray, locations: np.ndarray) -> np.ndarray:
    d = np.abs(customers[:, None, 0] - locations[None, :, 0]) + np.abs(
        customers[:, None, 1] - locations[None, :, 1]
    )
    return 2.0 - 2.0 / (1.0 + np.exp(-200.0 * d))


class _RowMaxObjective(SetFunction):
    """f(S) = Σ_rows max(0, max_{e∈S} M[row, e]) for a non-negative matrix M.

    Facility location, recommendation, and item coverage are all instances;
    they share the incremental per-row best-score state below.
    """

    def __init__(self, ground: GroundSet, matrix: np.ndarray):
        super().__init__(ground)
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[1] != ground.n:
            raise DomainError(
                f"score matrix shape {matrix.shape} does not match n={ground.n}"
            )
        if matrix.size and matrix.min() < 0:
            raise DomainError("row-max objectives need non-negative scores")
        self._matrix = matrix

    def _value(self, ids: np.ndarray) -> float:
        if ids.size == 0:
            return 0.0
        return float(self._matrix[:, ids].max(axis=1).sum())

    def start_state(self, initial=None) -> "_RowMaxState":
        return _RowMaxState(self, self._matrix, _as_id_array(self.ground, initial))


class _RowMaxState(EvalState):
    """Tracks each row's best score over the working set.

    ``best`` is maintained with exact element-wise maxima, so ``value`` always
    agrees bitwise with a fresh evaluation of the same set.
    """

    def __init__(self, fn: SetFunction, matrix: np.ndarray, initial: np.ndarray):
        self.fn = fn
        self._matrix = matrix
        self._ids = list(dict.fromkeys(initial.tolist()))
        fn._charge(1)
        if initial.size:
            self._best = matrix[:, initial].max(axis=1)
        else:
            self._best = np.zeros(matrix.shape[0])

    @property
    def value(self) -> float:
        return float(self._best.sum())

    def gains(self, candidates: np.ndarray) -> np.ndarray:
        self.fn._charge(len(candidates))
        return np.maximum(
            self._matrix[:, candidates] - self._best[:, None], 0.0
        ).sum(axis=0)

    def add(self, e: int, gain: float | None = None) -> None:
        e = int(e)
        if e in self._ids:
            return
        self._ids.append(e)
        self._best = np.maximum(self._best, self._matrix[:, e])

    def copy(self) -> "_RowMaxState":
        dup = object.__new__(_RowMaxState)
        dup.fn = self.fn
        dup._matrix = self._matrix
        dup._ids = list(self._ids)
        dup._best = self._best.copy()
        return dup

    def remove(self, x: int) -> None:
        self._ids.remove(int(x))
        self.fn._charge(1)
        if self._ids:
            self._best = self._matrix[:, self._ids].max(axis=1)
        else:
            self._best = np.zeros(self._matrix.shape[0])

    def swap_scan(self, candidates: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Best add-or-swap improvement per candidate against the current set.

        Returns (improvement clipped at 0, id of the member whose removal
        achieves it).  Ties between removal victims go to the smallest
        element id.  Charges |candidates| · |set| calls, the work an
        eval-difference implementation would spend.
        """
        members = sorted(self._ids)
        s = len(members)
        if s == 0:
            raise DomainError("swap scan needs a non-empty working set")
        M = self._matrix
        sub = M[:, members]
        best1 = sub.max(axis=1)
        owner = sub.argmax(axis=1)
        if s >= 2:
            best2 = np.partition(sub, -2, axis=1)[:, -2]
        else:
            best2 = np.zeros_like(best1)
        cand_cols = M[:, candidates]
        with_best1 = np.maximum(cand_cols, best1[:, None])
        with_best2 = np.maximum(cand_cols, best2[:, None])
        full = with_best1.sum(axis=0)
        # corr[j, e]: value lost by rerouting rows owned by member j to their
        # second-best column while candidate e is present.
        corr = np.zeros((s, len(candidates)))
        loss = with_best1 - with_best2
        for j in range(s):
            owned = owner == j
            if owned.any():
                corr[j] = loss[owned].sum(axis=0)
        self.fn._charge(len(candidates) * s)
        j_best = corr.argmin(axis=0)
        cur = self.value
        improvements = full - corr[j_best, np.arange(len(candidates))] - cur
        victims = np.asarray(members, dtype=np.intp)[j_best]
        return np.maximum(improvements, 0.0), victims


class FacilityLocationObjective(_RowMaxObjective):
    """Sum over customers of the best convenience score to any open location."""

    def __init__(
        self,
        customers: Sequence[Sequence[float]],
        locations: Sequence[Sequence[float]],
        ground: Optional[GroundSet] = None,
    ):
        customers = np.asarray(customers, dtype=float).reshape(-1, 2)
        locations = np.asarray(locations, dtype=float).reshape(-1, 2)
        if ground is None:
            ground = GroundSet(len(locations))
        elif ground.n != len(locations):
            raise DomainError("ground size does not match candidate locations")
        super().__init__(ground, _score_matrix(customers, locations))
        self.customers = customers
        self.locations = locations


class RecommendationObjective(_RowMaxObjective):
    """Genre-weighted best-rating objective for a single user.

    f(S) = Σ_t w_t · max{r(v) : v ∈ S rated by the user and tagged t}, with the
    empty max contributing 0.  The weight of genre t is the user's rated-movie
    count in t divided by the user's total number of ratings; a movie carrying
    several tags counts once per tag, so the weights need not sum to one.
    """

    def __init__(
        self,
        ground: GroundSet,
        ratings: Mapping[int, float],
        genres_of: Mapping[int, Iterable[str]],
    ):
        if not ratings:
            raise DomainError("user has no ratings")
        counts: dict[str, int] = {}
        for v in ratings:
            ground.require_valid(v)
            for t in genres_of.get(v, ()):
                counts[t] = counts.get(t, 0) + 1
        if not counts:
            raise DomainError("no rated movie carries a genre tag")
        total = len(ratings)
        genres = sorted(counts)
        matrix = np.zeros((len(genres), ground.n))
        for v, r in ratings.items():
            for t in genres_of.get(v, ()):
                row = genres.index(t)
                matrix[row, v] = (counts[t] / total) * float(r)
        super().__init__(ground, matrix)
        self.genre_weights = {t: counts[t] / total for t in genres}


class TaskAverageObjective(SetFunction):
    """Arithmetic mean of component set functions (same ground set)."""

    def __init__(self, components: Sequence[SetFunction]):
        if not components:
            raise DomainError("need at least one component")
        ground = components[0].ground
        for fn in components:
            if fn.ground.n != ground.n:
                raise DomainError("components disagree on ground size")
        super().__init__(ground)
        self.components = list(components)
        self._stacked: Optional[np.ndarray] = None
        if all(isinstance(fn, _RowMaxObjective) for fn in components):
            self._stacked = np.vstack(
                [fn._matrix / len(components) for fn in components]
            )

    def _value(self, ids: np.ndarray) -> float:
        return sum(fn._value(ids) for fn in self.components) / len(self.components)

    def start_state(self, initial=None) -> EvalState:
        if self._stacked is not None:
            return _RowMaxState(self, self._stacked, _as_id_array(self.ground, initial))
        return super().start_state(initial)


class AreaCoverageObjective(SetFunction):
    """f(S) = exact area of the union of the selected axis-aligned rectangles."""

    def __init__(
        self,
        rectangles: Sequence[tuple[float, float, float, float]],
        labels: Optional[Sequence[str]] = None,
    ):
        rects = np.asarray(rectangles, dtype=float).reshape(-1, 4)
        ground = GroundSet(len(rects), tuple(labels) if labels else None)
        super().__init__(ground)
        if np.any(rects[:, 2] < rects[:, 0]) or np.any(rects[:, 3] < rects[:, 1]):
            raise DomainError("rectangle corners must satisfy x0 <= x1, y0 <= y1")
        self.rectangles = rects

    def _value(self, ids: np.ndarray) -> float:
        if ids.size == 0:
            return 0.0
        rects = self.rectangles[ids]
        xs = np.unique(np.concatenate([rects[:, 0], rects[:, 2]]))
        area = 0.0
        for x0, x1 in zip(xs[:-1], xs[1:]):
            width = x1 - x0
            if width <= 0:
                continue
            active = rects[(rects[:, 0] <= x0) & (rects[:, 2] >= x1)]
            if len(active) == 0:
                continue
            area += width * _interval_union_length(active[:, 1], active[:, 3])
        return area


def _interval_union_length(lo: np.ndarray, hi: np.ndarray) -> float:
    order = np.argsort(lo, kind="stable")
    total = 0.0
    cur_lo, cur_hi = None, None
    for a, b in zip(lo[order], hi[order]):
        if cur_hi is None or a > cur_hi:
            if cur_hi is not None:
                total += cur_hi - cur_lo
            cur_lo, cur_hi = a, b
        else:
            cur_hi = max(cur_hi, b)
    if cur_hi is not None:
        total += cur_hi - cur_lo
    return total


class ModularObjective(SetFunction):
    """Additive weights; the simplest monotone fixture."""

    def __init__(self, weights: Sequence[float], ground: Optional[GroundSet] = None):
        w = np.asarray(weights, dtype=float)
        if ground is None:
            ground = GroundSet(len(w))
        elif ground.n != len(w):
            raise DomainError("one weight per element required")
        if w.size and w.min() < 0:
            raise DomainError("modular fixture weights must be non-negative")
        super().__init__(ground)
        self.weights = w

    def _value(self, ids: np.ndarray) -> float:
        return float(self.weights[ids].sum())


class SyntheticCoverageObjective(_RowMaxObjective):
    """Weighted item coverage: f(S) = Σ_items w_i · [some e ∈ S covers i]."""

    def __init__(
        self,
        ground: GroundSet,
        covers: Sequence[Iterable[int]],
        n_items: int,
        item_weights: Optional[Sequence[float]] = None,
    ):
        if len(covers) != ground.n:
            raise DomainError("one cover list per element required")
        w = (
            np.ones(n_items)
            if item_weights is None
            else np.asarray(item_weights, dtype=float)
        )
        if len(w) != n_items:
            raise DomainError("one weight per item required")
        incidence = np.zeros((n_items, ground.n))
        for e, items in enumerate(covers):
            for i in items:
                incidence[i, e] = 1.0
        super().__init__(ground, w[:, None] * incidence)
        self.covers = [frozenset(int(i) for i in items) for items in covers]
        self.n_items = n_items


COUNTEREXAMPLE_LABELS = ("ABIJ", "BCDI", "ACDJ", "IDEH", "HEFG", "BCEH")

# Corner coordinates behind the labels: A=(1,1), B=(1,.75), C=(1,0), D=(2,0),
# E=(3,0), F=(4,0), G=(4,.75), H=(3,.75), I=(2,.75), J=(2,1); side lengths
# AC = CD = DE = EF = 1 and BC = 0.75.
_COUNTEREXAMPLE_RECTS = (
    (1.0, 0.75, 2.0, 1.0),  # ABIJ
    (1.0, 0.0, 2.0, 0.75),  # BCDI
    (1.0, 0.0, 2.0, 1.0),  # ACDJ
    (2.0, 0.0, 3.0, 0.75),  # IDEH
    (3.0, 0.0, 4.0, 0.75),  # HEFG
    (1.0, 0.0, 3.0, 0.75),  # BCEH
)


def build_counterexample() -> AreaCoverageObjective:
    """Six overlapping rectangles whose one-step best-augmentation wrapper
    violates diminishing returns even though the area itself is submodular."""
    return AreaCoverageObjective(_COUNTEREXAMPLE_RECTS, COUNTEREXAMPLE_LABELS)


def _augment_value_raw(
    fn: SetFunction, ids: np.ndarray, budget: int, exact: bool, work_cap: int
) -> float:
    """Best value of fn after adding up to ``budget`` extra elements to ids.

    Uses raw (uncounted) evaluations; callers charge whatever convention
    fits their context.
    """
    n = fn.ground.n
    current = set(int(e) for e in ids.tolist())
    budget = min(budget, n - len(current))
    base = float(fn._value(ids))
    if budget <= 0:
        return base
    rest = [e for e in range(n) if e not in current]
    if exact:
        work = sum(comb(len(rest), r) for r in range(budget + 1))
        if work > work_cap:
            raise DomainError(
                f"exact augmentation needs {work} evaluations, cap is {work_cap}"
            )
        best = base
        for r in range(1, budget + 1):
            for extra in combinations(rest, r):
                val = float(fn._value(np.append(ids, extra)))
                if val > best:
                    best = val
        return best
    # Greedy completion with smallest-id tie-breaking and early stop.
    chosen = list(ids.tolist())
    val = base
    for _ in range(budget):
        best_gain, best_e = 0.0, None
        arr = np.asarray(chosen, dtype=np.intp)
        for e in rest:
            if e in chosen:
                continue
            gain = float(fn._value(np.append(arr, e))) - val
            if gain > best_gain:
                best_gain, best_e = gain, e
        if best_e is None:
            break
        chosen.append(best_e)
        val += best_gain
    return val


def best_augmentation_value(
    fn: SetFunction,
    s: "ElementSet | Sequence[int] | None",
    budget: int,
    exact: bool = False,
    work_cap: int = 10_000_000,
) -> float:
    """Value of ``s`` after the best ``budget`` additional elements.

    The default is greedy completion; ``exact=True`` enumerates every
    augmentation of size ≤ budget (small ground sets only).  A budget pushing
    past the ground size clamps harmlessly.  Charges one oracle call per
    candidate-set evaluation performed.
    """
    if budget < 0:
        raise DomainError("augmentation budget must be >= 0")
    ids = _as_id_array(fn.ground, s)
    n_evals = 0
    orig = fn._value

    def counting(arr):
        nonlocal n_evals
        n_evals += 1
        return orig(arr)

    fn._value = counting  # type: ignore[method-assign]
    try:
        result = _augment_value_raw(fn, ids, budget, exact, work_cap)
    finally:
        fn._value = orig  # type: ignore[method-assign]
    fn._charge(n_evals)
    return result


class BestAugmentationObjective(SetFunction):
    """Wraps an oracle as S ↦ best value reachable with ``budget`` additions.

    With budget 1 this is the exact one-step completion max_e f(S ∪ {e}).
    The wrapped oracle's counter is not charged; each evaluation of this
    wrapper counts as a single call on the wrapper itself.
    """

    def __init__(self, inner: SetFunction, budget: int, exact: bool = True):
        super().__init__(inner.ground)
        if budget < 0:
            raise DomainError("augmentation budget must be >= 0")
        self.inner = inner
        self.budget = budget
        self.exact = exact

    def _value(self, ids: np.ndarray) -> float:
        return _augment_value_raw(
            self.inner, ids, self.budget, self.exact, work_cap=10_000_000
        )
