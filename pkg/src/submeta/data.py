"""Dataset ingestion and task construction: pickup-location files, ratings
tables, the time-slot facility-location task builder, and seeded synthetic
suites that stand in for the full-scale datasets at desk scale.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from math import isfinite
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .core import Budget, DomainError, GroundSet, SetFunction
from .objectives import (
    FacilityLocationObjective,
    RecommendationObjective,
    SyntheticCoverageObjective,
    TaskAverageObjective,
)

__all__ = [
    "InputError",
    "DataWarning",
    "PickupRecord",
    "PickupLoad",
    "load_pickups",
    "sample_ground_locations",
    "TaskSampler",
    "make_rideshare_task",
    "RatingsTable",
    "MovieLensTasks",
    "make_movielens_tasks",
    "SuiteData",
    "synthetic_suite",
    "random_small_instance",
]


class InputError(ValueError):
    """Unusable input data (empty, malformed beyond recovery)."""


class DataWarning(UserWarning):
    """Recoverable data irregularity (skipped rows, sampling fallbacks)."""


class PickupRecord(NamedTuple):
    latitude: float
    longitude: float
    timestamp: float  # seconds since epoch, UTC


@dataclass
class PickupLoad:
    records: list[PickupRecord]
    skipped: int


_DATETIME_FORMATS = ("%m/%d/%Y %H:%M:%S", "%m/%d/%Y %H:%M")


def _parse_timestamp(text: str) -> float:
    text = text.strip()
    for fmt in _DATETIME_FORMATS:
        try:
            dt = datetime.strptime(text, fmt)
            return dt.replace(tzinfo=timezone.utc).timestamp()
        except ValueError:
            pass
    try:
        dt = datetime.fromisoformat(text)
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return dt.timestamp()
    except ValueError:
        pass
    return float(text)  # plain epoch seconds


def load_pickups(
    path,
    limit: Optional[int] = None,
    latitude_column: str = "latitude",
    longitude_column: str = "longitude",
    datetime_column: str = "datetime",
    delimiter: str = ",",
) -> PickupLoad:
    """Parse (latitude, longitude, datetime) triplets from a delimited file.

    The header row names the columns (matched case-insensitively).  Rows that
    fail to parse are skipped and counted, with one summary warning; a file
    yielding zero valid rows is an error.  ``limit`` stops after that many
    valid rows.
    """
    wanted = {
        latitude_column.lower(): "lat",
        longitude_column.lower(): "lon",
        datetime_column.lower(): "ts",
    }
    records: list[PickupRecord] = []
    skipped = 0
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        columns: dict[str, int] = {}
        for idx, name in enumerate(header):
            key = wanted.get(name.strip().lower())
            if key:
                columns[key] = idx
        missing = {"lat", "lon", "ts"} - set(columns)
        if missing:
            raise InputError(
                f"{path}: header {header!r} lacks required columns "
                f"({latitude_column}, {longitude_column}, {datetime_column})"
            )
        for row in reader:
            if limit is not None and len(records) >= limit:
                break
            try:
                lat = float(row[columns["lat"]])
                lon = float(row[columns["lon"]])
                ts = _parse_timestamp(row[columns["ts"]])
            except (ValueError, IndexError):
                skipped += 1
                continue
            if not (isfinite(lat) and isfinite(lon) and isfinite(ts)):
                skipped += 1
                continue
            records.append(PickupRecord(lat, lon, ts))
    if skipped:
        warnings.warn(f"{path}: skipped {skipped} unparseable rows", DataWarning)
    if not records:
        raise InputError(f"{path}: no valid rows")
    return PickupLoad(records=records, skipped=skipped)


class TaskSampler:
    """Seeded PRNG wrapper; one sampler drives one reproducible task sequence."""

    def __init__(self, seed: "int | np.random.SeedSequence | np.random.Generator"):
        self.rng = (
            seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        )

    def pick(self, count: int, size: int, replace: bool = False) -> np.ndarray:
        return self.rng.choice(count, size=size, replace=replace)


def sample_ground_locations(
    records: Sequence[PickupRecord], n: int, sampler: TaskSampler
) -> np.ndarray:
    """Uniform seeded sample of n record locations as the candidate ground set."""
    if n < 1 or n > len(records):
        raise InputError(f"cannot sample {n} locations from {len(records)} records")
    idx = sampler.pick(len(records), n, replace=False)
    return np.asarray([(records[i].latitude, records[i].longitude) for i in idx])


def make_rideshare_task(
    records: Sequence[PickupRecord],
    at_time: float,
    sampler: TaskSampler,
    ground_locations: np.ndarray,
    ground: Optional[GroundSet] = None,
    anchors: int = 10,
    neighbors_per_anchor: int = 10,
    window_seconds: float = 1800.0,
    neighborhood_degrees: float = 0.009,
) -> FacilityLocationObjective:
    """Build a time-slot facility-location task.

    Samples ``anchors`` records from the half-hour window before ``at_time``,
    then ``neighbors_per_anchor`` records within the coordinate neighborhood
    of each anchor (Manhattan distance in degrees; 0.009° ≈ 1 km at the
    latitudes of interest).  Anchors never count as their own neighbors.
    Pools too small for distinct draws fall back to sampling with
    replacement, with a warning; an empty pool is an error.
    """
    coords = np.asarray([(r.latitude, r.longitude) for r in records])
    times = np.asarray([r.timestamp for r in records])
    in_window = np.flatnonzero(
        (times >= at_time - window_seconds) & (times <= at_time)
    )
    if in_window.size == 0:
        raise InputError(f"no records in the {window_seconds}s window before {at_time}")
    if in_window.size >= anchors:
        anchor_idx = in_window[sampler.pick(in_window.size, anchors)]
    else:
        warnings.warn(
            f"only {in_window.size} records in window; sampling anchors with "
            "replacement",
            DataWarning,
        )
        anchor_idx = in_window[sampler.pick(in_window.size, anchors, replace=True)]
    customers = []
    for a in anchor_idx:
        d = np.abs(coords[:, 0] - coords[a, 0]) + np.abs(coords[:, 1] - coords[a, 1])
        pool = np.flatnonzero(d <= neighborhood_degrees)
        pool = pool[pool != a]
        if pool.size == 0:
            raise InputError(
                f"anchor at {tuple(coords[a])} has no neighbors within "
                f"{neighborhood_degrees} degrees"
            )
        if pool.size >= neighbors_per_anchor:
            chosen = pool[sampler.pick(pool.size, neighbors_per_anchor)]
        else:
            warnings.warn(
                f"anchor has only {pool.size} neighbors; sampling with replacement",
                DataWarning,
            )
            chosen = pool[sampler.pick(pool.size, neighbors_per_anchor, replace=True)]
        customers.extend(coords[chosen])
    return FacilityLocationObjective(np.asarray(customers), ground_locations, ground)


@dataclass
class RatingsTable:
    """user → (movie → rating in [1, 5]) plus movie → genre tags."""

    ratings: dict[int, dict[int, float]]
    genres: dict[int, frozenset[str]]

    def __post_init__(self):
        dropped_movies = {
            m
            for user in self.ratings.values()
            for m in user
            if not self.genres.get(m)
        }
        if dropped_movies:
            warnings.warn(
                f"dropping {len(dropped_movies)} rated movies without genre tags",
                DataWarning,
            )
            for user in self.ratings.values():
                for m in dropped_movies:
                    user.pop(m, None)
        self.ratings = {u: r for u, r in self.ratings.items() if r}
        for user, user_ratings in self.ratings.items():
            for m, r in user_ratings.items():
                if not 1.0 <= r <= 5.0:
                    raise InputError(f"rating {r} for user {user}, movie {m} outside [1, 5]")

    @classmethod
    def from_files(cls, ratings_path, movies_path, delimiter: str = ",") -> "RatingsTable":
        """Two-file convention: ratings rows (user, movie, rating[, timestamp])
        and movie rows (movie, title, pipe-separated genres).  A leading
        header row in either file is detected and skipped."""
        genres: dict[int, frozenset[str]] = {}
        with open(movies_path, newline="") as fh:
            for row in csv.reader(fh, delimiter=delimiter):
                if len(row) < 3:
                    continue
                try:
                    movie = int(row[0])
                except ValueError:
                    continue  # header or junk
                tags = frozenset(t.strip() for t in row[2].split("|") if t.strip())
                genres[movie] = tags
        ratings: dict[int, dict[int, float]] = {}
        skipped = 0
        with open(ratings_path, newline="") as fh:
            for row in csv.reader(fh, delimiter=delimiter):
                if len(row) < 3:
                    continue
                try:
                    user, movie, rating = int(row[0]), int(row[1]), float(row[2])
                except ValueError:
                    skipped += 1
                    continue
                if not 1.0 <= rating <= 5.0:
                    skipped += 1
                    continue
                ratings.setdefault(user, {})[movie] = rating
        if skipped > 1:  # one header row is expected noise
            warnings.warn(
                f"{ratings_path}: skipped {skipped} unusable rating rows", DataWarning
            )
        if not ratings:
            raise InputError(f"{ratings_path}: no usable ratings")
        return cls(ratings=ratings, genres=genres)


@dataclass
class MovieLensTasks:
    ground: GroundSet
    train_tasks: list[SetFunction]
    test_tasks: list[SetFunction]
    movie_ids: list[int]
    train_users: list[int]
    test_users: list[int]


def make_movielens_tasks(
    table: RatingsTable,
    sampler: TaskSampler,
    users_per_task: int = 5,
    n_train_users: int = 100,
    n_test_users: int = 100,
    m_train: int = 50,
    m_test: int = 50,
    top_movies: int = 2000,
    top_users: Optional[int] = None,
) -> MovieLensTasks:
    """Restrict to the most-rated movies and the most active users, split the
    users into disjoint train/test pools, and build tasks that average the
    recommendation objectives of ``users_per_task`` sampled users.

    Movie popularity ties break toward the smaller movie id, user activity
    ties toward the smaller user id.  The ground set is the retained movies
    in ascending id order.
    """
    if top_users is None:
        top_users = n_train_users + n_test_users
    movie_counts: dict[int, int] = {}
    for user_ratings in table.ratings.values():
        for m in user_ratings:
            movie_counts[m] = movie_counts.get(m, 0) + 1
    if not movie_counts:
        raise InputError("ratings table is empty")
    ranked_movies = sorted(movie_counts, key=lambda m: (-movie_counts[m], m))
    retained = sorted(ranked_movies[:top_movies])
    movie_to_element = {m: i for i, m in enumerate(retained)}
    ground = GroundSet(len(retained))

    def user_activity(u: int) -> tuple[int, int]:
        return (-len(table.ratings[u]), u)

    ranked_users = sorted(table.ratings, key=user_activity)[:top_users]
    usable = [
        u
        for u in ranked_users
        if any(m in movie_to_element for m in table.ratings[u])
    ]
    if len(usable) < len(ranked_users):
        warnings.warn(
            f"dropping {len(ranked_users) - len(usable)} users with no ratings "
            "among the retained movies",
            DataWarning,
        )
    if len(usable) < n_train_users + n_test_users:
        raise DomainError(
            f"need {n_train_users + n_test_users} usable users, have {len(usable)}"
        )
    order = sampler.pick(len(usable), len(usable))
    shuffled = [usable[i] for i in order]
    train_users = shuffled[:n_train_users]
    test_users = shuffled[n_train_users : n_train_users + n_test_users]

    def user_objective(u: int) -> RecommendationObjective:
        ratings = {
            movie_to_element[m]: r
            for m, r in table.ratings[u].items()
            if m in movie_to_element
        }
        genres_of = {
            movie_to_element[m]: table.genres[m]
            for m in table.ratings[u]
            if m in movie_to_element
        }
        return RecommendationObjective(ground, ratings, genres_of)

    def make_tasks(pool: list[int], count: int) -> list[SetFunction]:
        if users_per_task > len(pool):
            raise DomainError(
                f"users_per_task={users_per_task} exceeds pool of {len(pool)}"
            )
        tasks = []
        for _ in range(count):
            chosen = sampler.pick(len(pool), users_per_task)
            members = [user_objective(pool[i]) for i in chosen]
            tasks.append(
                members[0] if users_per_task == 1 else TaskAverageObjective(members)
            )
        return tasks

    return MovieLensTasks(
        ground=ground,
        train_tasks=make_tasks(train_users, m_train),
        test_tasks=make_tasks(test_users, m_test),
        movie_ids=retained,
        train_users=train_users,
        test_users=test_users,
    )


@dataclass
class SuiteData:
    ground: GroundSet
    train_tasks: list[SetFunction]
    test_tasks: list[SetFunction]


def synthetic_suite(
    kind: str,
    n: int,
    m_train: int,
    m_test: int,
    seed: "int | np.random.SeedSequence",
) -> SuiteData:
    """Seed-reproducible stand-in suites.

    ``rideshare-like``: tasks share a candidate ground set and a handful of
    popular demand zones, plus per-task zones of their own, so trained
    initializations transfer but per-task adaptation still pays.
    ``coverage``: independent random element → item incidences per task.
    """
    rng = np.random.default_rng(seed)
    if kind == "rideshare-like":
        return _rideshare_like_suite(n, m_train, m_test, rng)
    if kind == "coverage":
        return _coverage_suite(n, m_train, m_test, rng)
    raise DomainError(f"unknown suite kind {kind!r}")


def _rideshare_like_suite(
    n: int, m_train: int, m_test: int, rng: np.random.Generator
) -> SuiteData:
    box = 0.25  # degrees; the score's 200/degree scale makes ~0.01 the hot radius
    n_popular = 6
    popular = rng.uniform(0.015, box - 0.015, size=(n_popular, 2))
    n_near = (3 * n) // 5
    near = popular[rng.integers(0, n_popular, size=n_near)] + rng.normal(
        0.0, 0.003, size=(n_near, 2)
    )
    locations = np.clip(
        np.vstack([near, rng.uniform(0.0, box, size=(n - n_near, 2))]), 0.0, box
    )
    ground = GroundSet(n)

    def make_task() -> FacilityLocationObjective:
        own = rng.uniform(0.015, box - 0.015, size=(2, 2))
        customers = np.empty((100, 2))
        for i in range(100):
            if rng.random() < 0.7:
                center = popular[rng.integers(0, n_popular)]
            else:
                center = own[rng.integers(0, len(own))]
            customers[i] = center + rng.normal(0.0, 0.0022, size=2)
        return FacilityLocationObjective(np.clip(customers, 0.0, box), locations, ground)

    return SuiteData(
        ground=ground,
        train_tasks=[make_task() for _ in range(m_train)],
        test_tasks=[make_task() for _ in range(m_test)],
    )


def _coverage_suite(
    n: int, m_train: int, m_test: int, rng: np.random.Generator
) -> SuiteData:
    ground = GroundSet(n)
    n_items = 2 * n
    weights = rng.uniform(0.5, 1.5, size=n_items)

    def make_task() -> SyntheticCoverageObjective:
        density = rng.uniform(0.1, 0.3)
        incidence = rng.random((n_items, n)) < density
        covers = [np.flatnonzero(incidence[:, e]) for e in range(n)]
        return SyntheticCoverageObjective(ground, covers, n_items, weights)

    return SuiteData(
        ground=ground,
        train_tasks=[make_task() for _ in range(m_train)],
        test_tasks=[make_task() for _ in range(m_test)],
    )


def random_small_instance(
    seed: int,
    max_n: int = 12,
    max_m: int = 3,
    max_k: int = 4,
) -> tuple[list[SetFunction], "Budget"]:
    """Random weighted-coverage instance small enough for brute force.

    Draws n ≤ max_n, m ≤ max_m, and 1 ≤ l < k ≤ max_k, reproducibly by seed.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(max(6, max_k + 1), max_n + 1))
    m = int(rng.integers(1, max_m + 1))
    k = int(rng.integers(2, max_k + 1))
    l = int(rng.integers(1, k))
    ground = GroundSet(n)
    n_items = int(rng.integers(n, 2 * n + 1))
    weights = rng.uniform(0.5, 1.5, size=n_items)
    tasks: list[SetFunction] = []
    for _ in range(m):
        density = rng.uniform(0.15, 0.4)
        incidence = rng.random((n_items, n)) < density
        covers = [np.flatnonzero(incidence[:, e]) for e in range(n)]
        tasks.append(SyntheticCoverageObjective(ground, covers, n_items, weights))
    return tasks, Budget(k, l)
