"""Rating data ingestion, per-user/per-item statistics and k-fold splits.

A :class:`RatingDataset` stores the ratings as three parallel arrays plus
external-id maps.  Cross-validation works on *triple indices*: a fold's
training portion is a :meth:`RatingDataset.subset` that keeps the full
user/item index space, so users or items that only occur in the test fold
are still addressable (they simply have no training ratings and take the
cold-start paths in the predictors).
"""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import IO, Iterable

import numpy as np

logger = logging.getLogger(__name__)

DELIMITER_ALIASES = {"tab": "\t", "comma": ",", "semicolon": ";", "space": " "}


class ParseError(ValueError):
    """Malformed rating file; carries the offending 1-based line number."""

    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


@dataclass
class RatingDataset:
    """Sparse user x item rating store with contiguous internal indices."""

    user_ids: list[str]
    item_ids: list[str]
    users: np.ndarray             # int32, one entry per rating triple
    items: np.ndarray             # int32
    ratings: np.ndarray           # float64
    rating_min: float
    rating_max: float
    n_duplicates: int = 0
    name: str = ""
    _user_index: dict[str, int] = field(default_factory=dict, repr=False)
    _item_index: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self._user_index:
            self._user_index = {u: i for i, u in enumerate(self.user_ids)}
        if not self._item_index:
            self._item_index = {u: i for i, u in enumerate(self.item_ids)}

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    @property
    def n_ratings(self) -> int:
        return len(self.ratings)

    def user_index(self, external_id: str) -> int:
        try:
            return self._user_index[external_id]
        except KeyError:
            raise KeyError(f"unknown user id {external_id!r}") from None

    def item_index(self, external_id: str) -> int:
        try:
            return self._item_index[external_id]
        except KeyError:
            raise KeyError(f"unknown item id {external_id!r}") from None

    @cached_property
    def by_user(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per-user adjacency: ``(item indices, ratings)`` for each user."""
        return self._group(self.users, self.items, self.n_users)

    @cached_property
    def by_item(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per-item adjacency: ``(user indices, ratings)`` for each item."""
        return self._group(self.items, self.users, self.n_items)

    def _group(self, keys, values, n) -> list[tuple[np.ndarray, np.ndarray]]:
        order = np.argsort(keys, kind="stable")
        sorted_keys = keys[order]
        bounds = np.searchsorted(sorted_keys, np.arange(n + 1))
        out = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            sel = order[lo:hi]
            out.append((values[sel], self.ratings[sel]))
        return out

    def sparse_by_user(self):
        """CSR matrix (n_users x n_items) of the ratings."""
        from scipy import sparse

        return sparse.csr_matrix(
            (self.ratings, (self.users, self.items)),
            shape=(self.n_users, self.n_items),
        )

    def subset(self, triple_indices: np.ndarray, name: str | None = None) -> "RatingDataset":
        """New dataset over the same user/item index space, keeping only the
        given triples.  Scale bounds are inherited, not recomputed, so clamping
        stays identical across folds."""
        idx = np.asarray(triple_indices)
        return RatingDataset(
            user_ids=self.user_ids,
            item_ids=self.item_ids,
            users=self.users[idx],
            items=self.items[idx],
            ratings=self.ratings[idx],
            rating_min=self.rating_min,
            rating_max=self.rating_max,
            name=name if name is not None else self.name,
            _user_index=self._user_index,
            _item_index=self._item_index,
        )

    def write(self, path_or_stream, delimiter: str = "\t") -> None:
        """Serialize back to one `user<delim>item<delim>rating` line per triple."""
        if isinstance(path_or_stream, (str, Path)):
            with open(path_or_stream, "w", encoding="utf-8") as fh:
                self.write(fh, delimiter)
            return
        fh = path_or_stream
        for u, i, r in zip(self.users, self.items, self.ratings):
            fh.write(f"{self.user_ids[u]}{delimiter}{self.item_ids[i]}{delimiter}{float(r)!r}\n")


def _open_lines(source) -> Iterable[str]:
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8")
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8"))
    if hasattr(source, "read"):
        first = source.read(0)
        if isinstance(first, bytes):
            return io.TextIOWrapper(source, encoding="utf-8")
        return source
    return iter(source)


def parse_ratings(
    source: str | Path | bytes | IO | Iterable[str],
    delimiter: str = "\t",
    skip_header: bool = False,
    name: str = "",
    rating_bounds: tuple[float, float] | None = None,
) -> RatingDataset:
    """Parse `user<delim>item<delim>rating[<delim>ignored...]` lines.

    Duplicate (user, item) pairs keep the last rating seen; the number of
    replaced pairs is reported on the dataset and logged.  Rating scale
    bounds default to the observed min/max unless ``rating_bounds`` is given.

    Raises :class:`ParseError` for empty input, short lines, or non-numeric
    ratings, naming the 1-based line number.
    """
    delimiter = DELIMITER_ALIASES.get(delimiter, delimiter)
    user_ids: list[str] = []
    item_ids: list[str] = []
    user_index: dict[str, int] = {}
    item_index: dict[str, int] = {}
    cells: dict[tuple[int, int], float] = {}
    n_duplicates = 0

    lines = _open_lines(source)
    try:
        for line_no, raw in enumerate(lines, start=1):
            if line_no == 1 and skip_header:
                continue
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split(delimiter)
            if len(parts) < 3:
                raise ParseError(
                    f"expected at least 3 fields separated by {delimiter!r}, got {len(parts)}",
                    line_no,
                )
            user_key, item_key = parts[0].strip(), parts[1].strip()
            try:
                rating = float(parts[2])
            except ValueError:
                raise ParseError(f"non-numeric rating {parts[2]!r}", line_no) from None
            if not math.isfinite(rating):
                raise ParseError(f"non-finite rating {parts[2]!r}", line_no)
            u = user_index.setdefault(user_key, len(user_ids))
            if u == len(user_ids):
                user_ids.append(user_key)
            i = item_index.setdefault(item_key, len(item_ids))
            if i == len(item_ids):
                item_ids.append(item_key)
            if (u, i) in cells:
                n_duplicates += 1
            cells[(u, i)] = rating
    finally:
        if hasattr(lines, "close"):
            lines.close()

    if not cells:
        raise ParseError("no rating records found in input")
    if n_duplicates:
        logger.warning("%s: %d duplicate (user, item) pairs, kept last rating", name or "ratings", n_duplicates)

    users = np.fromiter((u for u, _ in cells), dtype=np.int32, count=len(cells))
    items = np.fromiter((i for _, i in cells), dtype=np.int32, count=len(cells))
    ratings = np.fromiter(cells.values(), dtype=np.float64, count=len(cells))
    if rating_bounds is not None:
        lo, hi = float(rating_bounds[0]), float(rating_bounds[1])
        if np.any(ratings < lo) or np.any(ratings > hi):
            raise ParseError(f"ratings outside configured bounds [{lo}, {hi}]")
    else:
        lo, hi = float(ratings.min()), float(ratings.max())
    return RatingDataset(
        user_ids=user_ids,
        item_ids=item_ids,
        users=users,
        items=items,
        ratings=ratings,
        rating_min=lo,
        rating_max=hi,
        n_duplicates=n_duplicates,
        name=name,
        _user_index=user_index,
        _item_index=item_index,
    )


@dataclass
class UserStats:
    """Per-user training means; NaN marks users with no training ratings."""

    means: np.ndarray    # float64 (n_users,), NaN when undefined
    counts: np.ndarray   # int64 (n_users,)
    global_mean: float

    def mean(self, user: int) -> float | None:
        m = self.means[user]
        return None if math.isnan(m) else float(m)

    def mean_or_global(self, user: int) -> float:
        m = self.means[user]
        return self.global_mean if math.isnan(m) else float(m)


def compute_user_stats(train: RatingDataset) -> UserStats:
    """Arithmetic mean of each user's training ratings plus the global mean."""
    if train.n_ratings == 0:
        raise ValueError("cannot compute statistics of an empty training set")
    counts = np.bincount(train.users, minlength=train.n_users).astype(np.int64)
    sums = np.bincount(train.users, weights=train.ratings, minlength=train.n_users)
    with np.errstate(invalid="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return UserStats(means=means, counts=counts, global_mean=float(train.ratings.mean()))


@dataclass
class ItemStats:
    """Per-item training means, mirroring :class:`UserStats`."""

    means: np.ndarray
    counts: np.ndarray
    global_mean: float

    def mean(self, item: int) -> float | None:
        m = self.means[item]
        return None if math.isnan(m) else float(m)

    def mean_or_global(self, item: int) -> float:
        m = self.means[item]
        return self.global_mean if math.isnan(m) else float(m)


def compute_item_stats(train: RatingDataset) -> ItemStats:
    if train.n_ratings == 0:
        raise ValueError("cannot compute statistics of an empty training set")
    counts = np.bincount(train.items, minlength=train.n_items).astype(np.int64)
    sums = np.bincount(train.items, weights=train.ratings, minlength=train.n_items)
    with np.errstate(invalid="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return ItemStats(means=means, counts=counts, global_mean=float(train.ratings.mean()))


@dataclass
class FoldSplit:
    """Seeded partition of triple indices into k near-equal folds."""

    k: int
    seed: int
    assignment: np.ndarray  # int32 (n_ratings,), values in [0, k)

    def fold_sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)


def kfold_split(dataset: RatingDataset, k: int, seed: int) -> FoldSplit:
    """Uniform seeded shuffle of the triples into k folds (sizes differ by <= 1)."""
    n = dataset.n_ratings
    if k < 2:
        raise ValueError(f"fold count must be >= 2, got {k}")
    if k > n:
        raise ValueError(f"cannot split {n} ratings into {k} folds")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    assignment = np.empty(n, dtype=np.int32)
    assignment[perm] = np.arange(n, dtype=np.int32) % k
    return FoldSplit(k=k, seed=seed, assignment=assignment)


def fold_train_test(dataset: RatingDataset, split: FoldSplit, fold: int) -> tuple[RatingDataset, np.ndarray]:
    """Training subset and test triple indices for one fold."""
    if not 0 <= fold < split.k:
        raise ValueError(f"fold {fold} out of range [0, {split.k})")
    train = dataset.subset(split.train_indices(fold))
    return train, split.test_indices(fold)


def subsample_users(dataset: RatingDataset, max_users: int, seed: int) -> RatingDataset:
    """Keep a seeded random subset of users and rebuild contiguous indices.

    Items left without any rating are dropped; external ids are preserved.
    Returns the dataset unchanged when it already fits the cap.
    """
    if max_users < 1:
        raise ValueError("max_users must be >= 1")
    if dataset.n_users <= max_users:
        return dataset
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(dataset.n_users, size=max_users, replace=False))
    keep_mask = np.zeros(dataset.n_users, dtype=bool)
    keep_mask[keep] = True
    sel = keep_mask[dataset.users]

    old_users = dataset.users[sel]
    old_items = dataset.items[sel]
    ratings = dataset.ratings[sel]
    user_map = -np.ones(dataset.n_users, dtype=np.int64)
    user_map[keep] = np.arange(len(keep))
    kept_items = np.unique(old_items)
    item_map = -np.ones(dataset.n_items, dtype=np.int64)
    item_map[kept_items] = np.arange(len(kept_items))

    return RatingDataset(
        user_ids=[dataset.user_ids[u] for u in keep],
        item_ids=[dataset.item_ids[i] for i in kept_items],
        users=user_map[old_users].astype(np.int32),
        items=item_map[old_items].astype(np.int32),
        ratings=ratings.copy(),
        rating_min=dataset.rating_min,
        rating_max=dataset.rating_max,
        name=dataset.name,
    )
