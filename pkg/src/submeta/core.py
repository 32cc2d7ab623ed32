"""Ground sets, ordered element sets, the counted set-function oracle, and
solution containers shared by every algorithm in the package.

Oracle-call accounting
----------------------
Every :class:`SetFunction` carries an integer call counter.  One full
evaluation charges 1.  A standalone marginal-gain query charges 2 (both
evaluations) unless the membership short-circuit applies, in which case it
charges nothing.  The search engines in :mod:`submeta.greedy` probe gains
through an :class:`EvalState`, which caches the value of the working set and
therefore charges exactly 1 per candidate probed; the engines document their
total counts in terms of that convention.

Counters are plain integers: an objective instance must only be mutated by
one worker at a time.  Workers that need to share an objective should operate
on ``clone()`` copies and sum the per-copy counters afterwards.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

__all__ = [
    "DomainError",
    "GroundSet",
    "ElementSet",
    "SetFunction",
    "EvalState",
    "Budget",
    "MetaSolution",
    "evaluate",
    "marginal",
    "reset_counter",
    "read_counter",
]


class DomainError(ValueError):
    """An element id, set, or budget falls outside its declared domain."""


@dataclass(frozen=True)
class GroundSet:
    """The universe of ``n`` selectable items, identified by index 0..n-1."""

    n: int
    labels: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"ground set needs at least one element, got n={self.n}")
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
            if len(self.labels) != self.n:
                raise DomainError(
                    f"{len(self.labels)} labels for {self.n} elements"
                )

    def require_valid(self, e: int) -> int:
        if not isinstance(e, (int, np.integer)) or not 0 <= e < self.n:
            raise DomainError(f"element {e!r} not in [0, {self.n})")
        return int(e)

    def label(self, e: int) -> str:
        e = self.require_valid(e)
        return self.labels[e] if self.labels is not None else str(e)

    def index_of(self, label: str) -> int:
        if self.labels is None:
            raise DomainError("ground set has no labels")
        try:
            return self.labels.index(label)
        except ValueError:
            raise DomainError(f"no element labelled {label!r}") from None


class ElementSet:
    """Ordered collection of distinct element ids from one ground set.

    Insertion order is preserved so greedy traces replay deterministically;
    membership queries go through an auxiliary set.
    """

    __slots__ = ("ground", "_order", "_members")

    def __init__(self, ground: GroundSet, members: Iterable[int] = ()):
        self.ground = ground
        self._order: list[int] = []
        self._members: set[int] = set()
        for e in members:
            self.add(e)

    def add(self, e: int) -> None:
        e = self.ground.require_valid(e)
        if e in self._members:
            raise DomainError(f"element {e} already in set")
        self._order.append(e)
        self._members.add(e)

    def discard(self, e: int) -> None:
        e = self.ground.require_valid(e)
        if e in self._members:
            self._members.remove(e)
            self._order.remove(e)

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(self._order)

    def as_array(self) -> np.ndarray:
        return np.asarray(self._order, dtype=np.intp)

    def as_set(self) -> frozenset[int]:
        return frozenset(self._members)

    def union(self, other: Iterable[int]) -> "ElementSet":
        out = self.copy()
        for e in other:
            if e not in out:
                out.add(e)
        return out

    def copy(self) -> "ElementSet":
        return ElementSet(self.ground, self._order)

    def __contains__(self, e: int) -> bool:
        return e in self._members

    def __iter__(self) -> Iterator[int]:
        return iter(self._order)

    def __len__(self) -> int:
        return len(self._order)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ElementSet):
            return NotImplemented
        return self.ground.n == other.ground.n and self._order == other._order

    def __hash__(self):
        return hash((self.ground.n, tuple(self._order)))

    def __repr__(self) -> str:
        inner = ", ".join(self.ground.label(e) for e in self._order)
        return f"ElementSet({{{inner}}})"


def _as_id_array(ground: GroundSet, s: "ElementSet | Sequence[int] | None") -> np.ndarray:
    if s is None:
        return np.empty(0, dtype=np.intp)
    if isinstance(s, ElementSet):
        return s.as_array()
    arr = np.asarray(list(s), dtype=np.intp)
    if arr.size and (arr.min() < 0 or arr.max() >= ground.n):
        raise DomainError(f"element ids {arr} outside [0, {ground.n})")
    if len(set(arr.tolist())) != arr.size:
        raise DomainError("duplicate element ids")
    return arr


class SetFunction:
    """A monotone set-function oracle over a ground set, with call counting.

    Subclasses implement :meth:`_value` on an index array.  ``evaluate`` and
    ``marginal`` are the counted public entry points; raw ``_value`` access is
    reserved for analysis code that explicitly documents itself as uncounted.
    """

    def __init__(self, ground: GroundSet):
        self.ground = ground
        self._calls = 0

    # -- subclass hooks ----------------------------------------------------

    def _value(self, ids: np.ndarray) -> float:
        raise NotImplementedError

    def start_state(self, initial: "ElementSet | Sequence[int] | None" = None) -> "EvalState":
        """Incremental evaluation context seeded with ``initial`` (charges 1)."""
        return _GenericEvalState(self, _as_id_array(self.ground, initial))

    # -- counted oracle interface -------------------------------------------

    @property
    def calls(self) -> int:
        return self._calls

    def reset_calls(self) -> None:
        self._calls = 0

    def _charge(self, n: int = 1) -> None:
        self._calls += n

    def evaluate(self, s: "ElementSet | Sequence[int] | None") -> float:
        ids = _as_id_array(self.ground, s)
        self._charge(1)
        return float(self._value(ids))

    def marginal(self, e: int, s: "ElementSet | Sequence[int] | None") -> float:
        """f(s ∪ {e}) − f(s).  Charges 2 calls; membership short-circuits free."""
        e = self.ground.require_valid(e)
        ids = _as_id_array(self.ground, s)
        if e in set(ids.tolist()):
            return 0.0
        self._charge(2)
        with_e = np.append(ids, e)
        return float(self._value(with_e) - self._value(ids))

    def clone(self) -> "SetFunction":
        """Independent copy with its own counter, for worker-local use."""
        dup = copy.deepcopy(self)
        dup._calls = 0
        return dup


class EvalState:
    """Incremental evaluation of one working set against one oracle.

    ``gains`` charges one oracle call per candidate probed; ``add`` charges
    nothing when the candidate's gain was just probed.
    """

    fn: SetFunction

    @property
    def value(self) -> float:
        raise NotImplementedError

    def gains(self, candidates: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def add(self, e: int, gain: float | None = None) -> None:
        raise NotImplementedError

    def copy(self) -> "EvalState":
        raise NotImplementedError


class _GenericEvalState(EvalState):
    """Fallback context: probes f(S ∪ {e}) against a cached base value.

    Membership-aware: candidates already in the working set report a zero
    gain and adding them again is a no-op, matching union semantics.
    """

    def __init__(self, fn: SetFunction, initial: np.ndarray):
        self.fn = fn
        self._ids = list(dict.fromkeys(initial.tolist()))
        self._members = set(self._ids)
        fn._charge(1)
        self._value = float(fn._value(np.asarray(self._ids, dtype=np.intp)))

    @property
    def value(self) -> float:
        return self._value

    def gains(self, candidates: np.ndarray) -> np.ndarray:
        out = np.empty(len(candidates), dtype=float)
        base = np.asarray(self._ids, dtype=np.intp)
        for i, e in enumerate(candidates):
            if int(e) in self._members:
                out[i] = 0.0
            else:
                out[i] = self.fn._value(np.append(base, e)) - self._value
        self.fn._charge(len(candidates))
        return out

    def add(self, e: int, gain: float | None = None) -> None:
        e = int(e)
        if e in self._members:
            return
        if gain is None:
            self.fn._charge(1)
            gain = self.fn._value(
                np.append(np.asarray(self._ids, dtype=np.intp), e)
            ) - self._value
        self._ids.append(e)
        self._members.add(e)
        self._value += float(gain)

    def remove(self, x: int) -> None:
        self._ids.remove(int(x))
        self._members.discard(int(x))
        self.fn._charge(1)
        self._value = float(self.fn._value(np.asarray(self._ids, dtype=np.intp)))

    def copy(self) -> "_GenericEvalState":
        dup = object.__new__(_GenericEvalState)
        dup.fn = self.fn
        dup._ids = list(self._ids)
        dup._members = set(self._members)
        dup._value = self._value
        return dup


@dataclass(frozen=True)
class Budget:
    """Total cardinality ``k`` and the train-time share ``l`` (1 ≤ l < k)."""

    k: int
    l: int

    def __post_init__(self):
        if not (1 <= self.l < self.k):
            raise DomainError(f"budget needs 1 <= l < k, got l={self.l}, k={self.k}")

    @property
    def adapt(self) -> int:
        """Elements left for test-time adaptation (k − l)."""
        return self.k - self.l

    def validate_for(self, ground: GroundSet) -> "Budget":
        if self.k > ground.n:
            raise DomainError(f"k={self.k} exceeds ground size n={ground.n}")
        return self


@dataclass
class MetaSolution:
    """A trained shared set plus per-task completions and their mean value.

    ``objective`` is ``mean_i f_i(shared ∪ per_task[i])`` over the training
    tasks that produced the solution; :meth:`recompute_objective` re-derives
    it from the stored sets so staleness is detectable.
    """

    shared: ElementSet
    per_task: list[ElementSet]
    objective: float
    method: str = ""
    diagnostics: dict = field(default_factory=dict)

    def recompute_objective(self, tasks: Sequence[SetFunction]) -> float:
        if len(tasks) != len(self.per_task):
            raise DomainError(
                f"{len(tasks)} tasks for {len(self.per_task)} stored per-task sets"
            )
        total = 0.0
        for fn, s in zip(tasks, self.per_task):
            total += fn.evaluate(self.shared.union(s))
        return total / len(tasks)


# Free-function aliases matching the oracle contract's spelling.

def evaluate(fn: SetFunction, s) -> float:
    return fn.evaluate(s)


def marginal(fn: SetFunction, e: int, s) -> float:
    return fn.marginal(e, s)


def reset_counter(fn: SetFunction) -> None:
    fn.reset_calls()


def read_counter(fn: SetFunction) -> int:
    return fn.calls
