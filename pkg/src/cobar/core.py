"""Confidence-based rating prediction over the user hierarchy.

For a (user, item) query the model walks the user's leaf-to-root ancestor
chain, computes a two-sided Student-t confidence interval for the item's
mean rating inside each cluster with at least two ratings, picks the
cluster whose interval is narrowest, and blends that cluster's item mean
with the user's own mean rating:

    predicted = gamma * user_mean + (1 - gamma) * cluster_item_mean

Items with fewer than two training ratings cannot yield an interval; those
queries fall back to the user's mean, and users without training ratings
fall back to the global mean.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import stats as _scipy_stats

from .clustering import Dendrogram, agglomerate
from .data import RatingDataset, UserStats, compute_user_stats


@lru_cache(maxsize=None)
def _t_critical(level: float, dof: int) -> float:
    return float(_scipy_stats.t.ppf(0.5 + level / 2.0, dof))


def confidence_half_width(n: int, s2: float, level: float = 0.95) -> float:
    """Half-width of the two-sided Student-t interval on a sample mean.

    `s2` is the (n-1)-denominator sample variance.  Requires n >= 2; a
    zero-variance sample has width 0.
    """
    if n < 2:
        raise ValueError(f"confidence interval undefined for n={n} (need n >= 2)")
    if s2 < 0.0:
        s2 = 0.0
    if not 0.0 < level < 1.0:
        raise ValueError(f"confidence level must be in (0, 1), got {level}")
    return _t_critical(level, n - 1) * math.sqrt(s2 / n)


class Fallback(enum.Enum):
    NONE = "none"
    SINGLE_RATING = "single_rating"
    COLD_ITEM = "cold_item"
    COLD_USER = "cold_user"


@dataclass
class CobarConfig:
    gamma: float = 0.5
    confidence_level: float = 0.95
    clamp: bool = True
    tie_break: str = "smallest"   # smallest | largest cluster at equal width

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if not 0.0 < self.confidence_level < 1.0:
            raise ValueError(f"confidence level must be in (0, 1), got {self.confidence_level}")
        if self.tie_break not in ("smallest", "largest"):
            raise ValueError(f"unknown tie_break {self.tie_break!r}")


@dataclass
class Prediction:
    """A predicted rating plus the provenance needed to explain it."""

    user: int
    item: int
    value: float
    fallback: Fallback
    chosen_node: int | None = None
    cluster_size: int | None = None
    cluster_mean: float | None = None
    half_width: float | None = None
    user_mean: float | None = None


class ClusterItemStats:
    """Per (dendrogram node, item) rating accumulators.

    Built bottom-up: each internal node's map is the entrywise sum of its
    children's (count, sum, sum of squares) triples, so construction costs
    O(total ratings x tree depth) instead of a from-scratch pass per node.
    """

    def __init__(self, node_maps: list[dict[int, tuple[int, float, float]]], level: float):
        self._maps = node_maps
        self.level = level

    def get(self, node: int, item: int) -> tuple[int, float, float] | None:
        """(n, sum, sum_sq) for the item inside the node's cluster, if any."""
        return self._maps[node].get(item)

    def count(self, node: int, item: int) -> int:
        entry = self._maps[node].get(item)
        return entry[0] if entry else 0

    def mean(self, node: int, item: int) -> float:
        n, total, _ = self._maps[node][item]
        return total / n

    def variance(self, node: int, item: int) -> float:
        """(n-1)-denominator sample variance, clipped at zero."""
        n, total, total_sq = self._maps[node][item]
        if n < 2:
            raise ValueError(f"variance undefined for n={n}")
        s2 = (total_sq - total * total / n) / (n - 1)
        return max(s2, 0.0)

    def half_width(self, node: int, item: int) -> float:
        n, _, _ = self._maps[node][item]
        return confidence_half_width(n, self.variance(node, item), self.level)

    def items_at(self, node: int) -> dict[int, tuple[int, float, float]]:
        return self._maps[node]


def build_item_stats(dendrogram: Dendrogram, train: RatingDataset, level: float = 0.95) -> ClusterItemStats:
    """Accumulate (n, sum, sum_sq) per item for every node of the hierarchy."""
    maps: list[dict[int, tuple[int, float, float]]] = [dict() for _ in range(dendrogram.n_nodes)]
    for leaf, user in enumerate(dendrogram.leaf_users):
        items, ratings = train.by_user[int(user)]
        maps[leaf] = {int(i): (1, float(r), float(r) * float(r)) for i, r in zip(items, ratings)}
    for m, (left, right) in enumerate(dendrogram.merges):
        a, b = maps[int(left)], maps[int(right)]
        if len(b) > len(a):
            a, b = b, a
        merged = dict(a)
        for item, (n2, s2, q2) in b.items():
            cur = merged.get(item)
            if cur is None:
                merged[item] = (n2, s2, q2)
            else:
                merged[item] = (cur[0] + n2, cur[1] + s2, cur[2] + q2)
        maps[dendrogram.n_leaves + m] = merged
    return ClusterItemStats(maps, level)


@dataclass
class ClusterChoice:
    node: int
    size: int
    mean: float
    half_width: float


def select_optimal_cluster(
    chain: np.ndarray,
    item: int,
    stats: ClusterItemStats,
    config: CobarConfig,
    sizes: np.ndarray,
) -> ClusterChoice | None:
    """Narrowest-interval cluster for the item among the chain's nodes.

    Only nodes with >= 2 ratings for the item qualify.  Walking leaf to
    root, a strict improvement is required, so at equal half-width the
    smaller (earlier) cluster wins; `tie_break="largest"` flips that.
    Returns None when no chain node qualifies.
    """
    best: ClusterChoice | None = None
    strict = config.tie_break == "smallest"
    for node in chain:
        node = int(node)
        entry = stats.get(node, item)
        if entry is None or entry[0] < 2:
            continue
        hw = stats.half_width(node, item)
        if best is None or (hw < best.half_width if strict else hw <= best.half_width):
            best = ClusterChoice(node=node, size=int(sizes[node]), mean=stats.mean(node, item), half_width=hw)
    return best


class CobarModel:
    """Trains the hierarchy and statistics, then serves predictions.

    All state is immutable after :meth:`fit`; predictions are pure reads.
    """

    def __init__(self, config: CobarConfig | None = None):
        self.config = config or CobarConfig()
        self.train: RatingDataset | None = None
        self.user_stats: UserStats | None = None
        self.dendrogram: Dendrogram | None = None
        self.stats: ClusterItemStats | None = None
        self._leaf_of: dict[int, int] = {}
        self._item_counts: np.ndarray | None = None

    def fit(self, train: RatingDataset) -> "CobarModel":
        self.train = train
        self.user_stats = compute_user_stats(train)
        self.dendrogram = agglomerate(train)
        self.stats = build_item_stats(self.dendrogram, train, self.config.confidence_level)
        self._leaf_of = {int(u): leaf for leaf, u in enumerate(self.dendrogram.leaf_users)}
        self._item_counts = np.bincount(train.items, minlength=train.n_items)
        return self

    def _clamp(self, value: float) -> float:
        if not self.config.clamp:
            return value
        return min(max(value, self.train.rating_min), self.train.rating_max)

    def predict_detailed(self, user: int, item: int) -> Prediction:
        if self.train is None:
            raise RuntimeError("model is not fitted")
        if not 0 <= user < self.train.n_users:
            raise ValueError(f"user index {user} out of range")
        if not 0 <= item < self.train.n_items:
            raise ValueError(f"item index {item} out of range")

        user_mean = self.user_stats.mean(user)
        if user_mean is None:
            return Prediction(
                user=user,
                item=item,
                value=self._clamp(self.user_stats.global_mean),
                fallback=Fallback.COLD_USER,
            )

        leaf = self._leaf_of.get(user)
        choice = None
        if leaf is not None:
            chain = self.dendrogram.ancestor_chain(leaf)
            choice = select_optimal_cluster(chain, item, self.stats, self.config, self.dendrogram.sizes)
        if choice is None:
            # item has at most one reachable training rating (or the user's
            # vector was unclusterable): predict the plain user mean
            fallback = Fallback.COLD_ITEM if self._item_counts[item] == 0 else Fallback.SINGLE_RATING
            return Prediction(
                user=user,
                item=item,
                value=self._clamp(user_mean),
                fallback=fallback,
                user_mean=user_mean,
            )

        gamma = self.config.gamma
        value = gamma * user_mean + (1.0 - gamma) * choice.mean
        return Prediction(
            user=user,
            item=item,
            value=self._clamp(value),
            fallback=Fallback.NONE,
            chosen_node=choice.node,
            cluster_size=choice.size,
            cluster_mean=choice.mean,
            half_width=choice.half_width,
            user_mean=user_mean,
        )

    def predict(self, user: int, item: int) -> float:
        return self.predict_detailed(user, item).value
