"""Ratings ingestion and the 50-film recommendation dataset.

The raw format is the MovieLens 100K layout: one tab-separated line per
rating, `user item rating timestamp`. The learning task picks the 50
most-rated films and, for every film a user liked (rating >= 4), emits a
sample labelled with that film whose features are the user's
mean-centered ratings over the other 49 pool films (0 where unrated).

A seeded synthetic generator with five planted preference clusters
stands in for the real dataset in offline runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

POOL_SIZE = 50
POSITIVE_THRESHOLD = 4.0
RATING_MIN, RATING_MAX = 0.5, 5.0


class RatingsParseError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class RatingsTable:
    user_ids: np.ndarray
    item_ids: np.ndarray
    ratings: np.ndarray
    timestamps: np.ndarray

    def __len__(self):
        return len(self.user_ids)

    def __eq__(self, other):
        if not isinstance(other, RatingsTable):
            return NotImplemented
        return (np.array_equal(self.user_ids, other.user_ids)
                and np.array_equal(self.item_ids, other.item_ids)
                and np.array_equal(self.ratings, other.ratings)
                and np.array_equal(self.timestamps, other.timestamps))


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray   # [n_samples, POOL_SIZE - 1]
    labels: np.ndarray     # in [0, POOL_SIZE)
    film_index: np.ndarray  # selected item ids, descending rating count

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (np.array_equal(self.features, other.features)
                and np.array_equal(self.labels, other.labels)
                and np.array_equal(self.film_index, other.film_index))


def parse_ratings(source) -> RatingsTable:
    """Parse MovieLens 100K `u.data`-layout text into a RatingsTable.

    `source` may be a str/bytes blob, an open text file, or a Path.
    Malformed lines raise RatingsParseError naming the 1-based line.
    """
    if isinstance(source, Path):
        source = source.read_text()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    if hasattr(source, "read"):
        source = source.read()
        if isinstance(source, bytes):
            source = source.decode("utf-8")

    users, items, ratings, stamps = [], [], [], []
    seen = set()
    for line_no, line in enumerate(source.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise RatingsParseError(line_no, f"expected 4 fields, got {len(fields)}")
        try:
            user = int(fields[0])
            item = int(fields[1])
            rating = float(fields[2])
            stamp = int(fields[3])
        except ValueError as exc:
            raise RatingsParseError(line_no, str(exc)) from None
        if user < 0 or item < 0:
            raise RatingsParseError(line_no, "ids must be non-negative")
        if not RATING_MIN <= rating <= RATING_MAX:
            raise RatingsParseError(
                line_no, f"rating {rating} outside [{RATING_MIN}, {RATING_MAX}]")
        key = (user, item, stamp)
        if key in seen:
            raise RatingsParseError(line_no, f"duplicate row {key}")
        seen.add(key)
        users.append(user)
        items.append(item)
        ratings.append(rating)
        stamps.append(stamp)

    return RatingsTable(
        user_ids=np.array(users, dtype=np.int64),
        item_ids=np.array(items, dtype=np.int64),
        ratings=np.array(ratings, dtype=np.float64),
        timestamps=np.array(stamps, dtype=np.int64),
    )


def write_ratings(table: RatingsTable) -> str:
    """Serialize a table back to the tab-separated layout (round-trip safe)."""
    lines = []
    for u, i, r, t in zip(table.user_ids, table.item_ids, table.ratings,
                          table.timestamps):
        r = float(r)
        r_text = str(int(r)) if r.is_integer() else str(r)
        lines.append(f"{u}\t{i}\t{r_text}\t{t}")
    return "\n".join(lines) + ("\n" if lines else "")


def select_pool(table: RatingsTable) -> np.ndarray:
    """Top-POOL_SIZE item ids by rating count, ties broken by lower id."""
    items, counts = np.unique(table.item_ids, return_counts=True)
    if len(items) < POOL_SIZE:
        raise ValueError(f"need at least {POOL_SIZE} distinct items, "
                         f"got {len(items)}")
    order = np.lexsort((items, -counts))
    return items[order[:POOL_SIZE]]


def build_dataset(table: RatingsTable) -> Dataset:
    """Construct the recommendation dataset from a ratings table.

    Per user, duplicate (user, item) pairs resolve to the latest rating by
    timestamp. The centering mean is the user's mean over all their rows.
    """
    film_index = select_pool(table)
    pool_pos = {int(item): idx for idx, item in enumerate(film_index)}

    order = np.lexsort((table.timestamps, table.user_ids))
    features_rows, labels = [], []
    start = 0
    n = len(table)
    while start < n:
        user = table.user_ids[order[start]]
        end = start
        while end < n and table.user_ids[order[end]] == user:
            end += 1
        rows = order[start:end]
        user_mean = float(np.mean(table.ratings[rows]))
        pool_ratings = {}
        for row in rows:  # timestamp-sorted, later rating wins
            pos = pool_pos.get(int(table.item_ids[row]))
            if pos is not None:
                pool_ratings[pos] = float(table.ratings[row])
        for pos, rating in sorted(pool_ratings.items()):
            if rating < POSITIVE_THRESHOLD:
                continue
            row = np.zeros(POOL_SIZE - 1)
            for other_pos, other_rating in pool_ratings.items():
                if other_pos == pos:
                    continue
                col = other_pos if other_pos < pos else other_pos - 1
                row[col] = other_rating - user_mean
            features_rows.append(row)
            labels.append(pos)
        start = end

    return Dataset(features=np.array(features_rows).reshape(-1, POOL_SIZE - 1),
                   labels=np.array(labels, dtype=np.int64),
                   film_index=film_index)


def synth_ratings(seed: int, n_users: int) -> RatingsTable:
    """Synthetic ratings with five planted preference clusters.

    Films 0..49 split into five clusters of ten. Each user loves one
    cluster (all ten rated in {4, 4.5, 5}) and dislikes ten random films
    elsewhere. User 0 additionally rates every film once so the 50-item
    pool is always present.
    """
    if n_users < 1:
        raise ValueError("n_users must be >= 1")
    rng = np.random.default_rng(seed)
    users, items, ratings, stamps = [], [], [], []
    stamp = 800_000_000

    def add(user, item, rating):
        nonlocal stamp
        users.append(user)
        items.append(item)
        ratings.append(rating)
        stamps.append(stamp)
        stamp += 1

    for user in range(n_users):
        cluster = user % 5
        own = np.arange(cluster * 10, cluster * 10 + 10)
        for film in own:
            add(user, int(film), 4.0 + 0.5 * int(rng.integers(0, 3)))
        others = np.setdiff1d(np.arange(POOL_SIZE), own)
        disliked = rng.choice(others, size=10, replace=False)
        for film in sorted(int(f) for f in disliked):
            add(user, film, 1.0 + 0.5 * int(rng.integers(0, 5)))

    rated_by_zero = {i for u, i in zip(users, items) if u == 0}
    for film in range(POOL_SIZE):
        if film not in rated_by_zero:
            add(0, film, 3.0)

    return RatingsTable(user_ids=np.array(users, dtype=np.int64),
                        item_ids=np.array(items, dtype=np.int64),
                        ratings=np.array(ratings, dtype=np.float64),
                        timestamps=np.array(stamps, dtype=np.int64))


def synth_dataset(seed: int, n_users: int) -> Dataset:
    """Deterministic synthetic dataset; at least one sample per user."""
    return build_dataset(synth_ratings(seed, n_users))


def save_dataset(dataset: Dataset, path) -> None:
    np.savez(path, features=dataset.features, labels=dataset.labels,
             film_index=dataset.film_index)


def load_dataset(path) -> Dataset:
    with np.load(path) as archive:
        return Dataset(features=archive["features"], labels=archive["labels"],
                       film_index=archive["film_index"])
