"""Comparison predictors: item popularity, user/item kNN, matrix factorization.

All four share the same interface as the confidence-based model: `fit(train)`
then `predict(user, item) -> float`, with predictions clamped to the training
scale unless constructed with `clamp=False`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .data import RatingDataset, compute_item_stats, compute_user_stats


@dataclass
class KnnConfig:
    """Cosine-similarity neighborhood settings (shared by both kNN variants)."""

    k: int = 30
    min_overlap: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"neighbor count must be >= 1, got {self.k}")
        if self.min_overlap < 1:
            raise ValueError(f"min_overlap must be >= 1, got {self.min_overlap}")


@dataclass
class MfConfig:
    """Biased SGD matrix-factorization settings.

    epochs=0 is allowed and leaves the model at its random initialization,
    which is occasionally useful for testing the bias structure.
    """

    factors: int = 10
    learning_rate: float = 0.01
    regularization: float = 0.015
    epochs: int = 30
    init_scale: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.factors < 1:
            raise ValueError("factors must be >= 1")
        if self.learning_rate <= 0 or self.regularization < 0 or self.init_scale < 0:
            raise ValueError("learning_rate must be > 0, regularization and init_scale >= 0")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


class _ClampMixin:
    def _clamp(self, value: float) -> float:
        if not self.clamp:
            return value
        return min(max(value, self.train.rating_min), self.train.rating_max)


class MostPopular(_ClampMixin):
    """Non-personalized baseline: each item's global mean training rating."""

    def __init__(self, clamp: bool = True):
        self.clamp = clamp
        self.train = None
        self.item_stats = None

    def fit(self, train: RatingDataset) -> "MostPopular":
        self.train = train
        self.item_stats = compute_item_stats(train)
        return self

    def predict(self, user: int, item: int) -> float:
        return self._clamp(self.item_stats.mean_or_global(item))


def _top_k_aggregate(sims: np.ndarray, deviations: np.ndarray, k: int) -> float | None:
    """Weighted mean of deviations over the k most similar positive neighbors.

    Neighbor order at equal similarity follows the input order, which the
    callers keep sorted by index for determinism.  Returns None when no
    neighbor has positive similarity.
    """
    pos = np.flatnonzero(sims > 0.0)
    if len(pos) == 0:
        return None
    if len(pos) > k:
        # stable sort on -sim keeps index order among equals
        order = np.argsort(-sims[pos], kind="stable")[:k]
        pos = pos[order]
    weights = sims[pos]
    return float(np.sum(weights * deviations[pos]) / np.sum(np.abs(weights)))


class UserKnn(_ClampMixin):
    """Mean-centered user-based kNN with cosine similarity.

    Similarities are computed lazily per query from the sparse rating
    matrix: only the rows of users who rated the target item are touched,
    so no n_users x n_users matrix is ever materialized.
    """

    def __init__(self, config: KnnConfig | None = None, clamp: bool = True):
        self.config = config or KnnConfig()
        self.clamp = clamp
        self.train = None

    def fit(self, train: RatingDataset) -> "UserKnn":
        self.train = train
        self.user_stats = compute_user_stats(train)
        self._R = train.sparse_by_user()
        self._norms = np.sqrt(np.asarray(self._R.multiply(self._R).sum(axis=1)).ravel())
        if self.config.min_overlap > 1:
            self._pattern = self._R.copy()
            self._pattern.data = np.ones_like(self._pattern.data)
        else:
            self._pattern = None
        return self

    def predict(self, user: int, item: int) -> float:
        mean = self.user_stats.mean(user)
        if mean is None:
            return self._clamp(self.user_stats.global_mean)
        raters, ratings = self.train.by_item[item]
        keep = raters != user
        raters, ratings = raters[keep], ratings[keep]
        if len(raters) == 0 or self._norms[user] == 0.0:
            return self._clamp(mean)

        order = np.argsort(raters, kind="stable")
        raters, ratings = raters[order], ratings[order]
        dots = np.asarray((self._R[user] @ self._R[raters].T).todense()).ravel()
        sims = dots / (self._norms[user] * self._norms[raters])
        if self._pattern is not None:
            overlap = np.asarray((self._pattern[user] @ self._pattern[raters].T).todense()).ravel()
            sims[overlap < self.config.min_overlap] = 0.0
        deviations = ratings - self.user_stats.means[raters]
        agg = _top_k_aggregate(sims, deviations, self.config.k)
        if agg is None:
            return self._clamp(mean)
        return self._clamp(mean + agg)


class ItemKnn(_ClampMixin):
    """Mean-centered item-based kNN, the transpose of :class:`UserKnn`.

    Falls back to the item's mean when the user rated nothing comparable,
    then to the global mean for items absent from training.
    """

    def __init__(self, config: KnnConfig | None = None, clamp: bool = True):
        self.config = config or KnnConfig()
        self.clamp = clamp
        self.train = None

    def fit(self, train: RatingDataset) -> "ItemKnn":
        self.train = train
        self.item_stats = compute_item_stats(train)
        self._R = train.sparse_by_user().T.tocsr()   # item-major
        self._norms = np.sqrt(np.asarray(self._R.multiply(self._R).sum(axis=1)).ravel())
        if self.config.min_overlap > 1:
            self._pattern = self._R.copy()
            self._pattern.data = np.ones_like(self._pattern.data)
        else:
            self._pattern = None
        return self

    def predict(self, user: int, item: int) -> float:
        item_mean = self.item_stats.mean(item)
        if item_mean is None:
            return self._clamp(self.item_stats.global_mean)
        rated, ratings = self.train.by_user[user]
        keep = rated != item
        rated, ratings = rated[keep], ratings[keep]
        if len(rated) == 0 or self._norms[item] == 0.0:
            return self._clamp(item_mean)

        order = np.argsort(rated, kind="stable")
        rated, ratings = rated[order], ratings[order]
        dots = np.asarray((self._R[item] @ self._R[rated].T).todense()).ravel()
        sims = dots / (self._norms[item] * self._norms[rated])
        if self._pattern is not None:
            overlap = np.asarray((self._pattern[item] @ self._pattern[rated].T).todense()).ravel()
            sims[overlap < self.config.min_overlap] = 0.0
        deviations = ratings - self.item_stats.means[rated]
        agg = _top_k_aggregate(sims, deviations, self.config.k)
        if agg is None:
            return self._clamp(item_mean)
        return self._clamp(item_mean + agg)


class MatrixFactorization(_ClampMixin):
    """Biased matrix factorization fit by SGD.

    Model: global_mean + user_bias + item_bias + user_factors . item_factors,
    trained on squared error with L2 regularization.  Fully deterministic
    under a fixed seed; `epoch_mse` records the training error after each
    epoch.  Terms belonging to users or items unseen in training are dropped
    at prediction time.
    """

    def __init__(self, config: MfConfig | None = None, clamp: bool = True, kernel=None):
        self.config = config or MfConfig()
        self.clamp = clamp
        self._kernel = kernel if kernel is not None else kernels.mf_sgd_epoch
        self.train = None

    def fit(self, train: RatingDataset) -> "MatrixFactorization":
        cfg = self.config
        self.train = train
        rng = np.random.default_rng(cfg.seed)
        self.global_mean = float(train.ratings.mean())
        self.user_factors = rng.normal(0.0, cfg.init_scale, (train.n_users, cfg.factors))
        self.item_factors = rng.normal(0.0, cfg.init_scale, (train.n_items, cfg.factors))
        self.user_bias = np.zeros(train.n_users)
        self.item_bias = np.zeros(train.n_items)
        self.user_seen = np.bincount(train.users, minlength=train.n_users) > 0
        self.item_seen = np.bincount(train.items, minlength=train.n_items) > 0

        users, items, ratings = train.users, train.items, train.ratings
        self.epoch_mse: list[float] = [self._train_mse()]
        for _ in range(cfg.epochs):
            order = rng.permutation(train.n_ratings)
            self._kernel(
                users,
                items,
                ratings,
                order,
                self.user_factors,
                self.item_factors,
                self.user_bias,
                self.item_bias,
                self.global_mean,
                cfg.learning_rate,
                cfg.regularization,
            )
            self.epoch_mse.append(self._train_mse())
        return self

    def _train_mse(self) -> float:
        t = self.train
        pred = (
            self.global_mean
            + self.user_bias[t.users]
            + self.item_bias[t.items]
            + np.einsum("ij,ij->i", self.user_factors[t.users], self.item_factors[t.items])
        )
        return float(np.mean((t.ratings - pred) ** 2))

    def predict(self, user: int, item: int) -> float:
        value = self.global_mean
        if self.user_seen[user]:
            value += self.user_bias[user]
        if self.item_seen[item]:
            value += self.item_bias[item]
        if self.user_seen[user] and self.item_seen[item]:
            value += float(self.user_factors[user] @ self.item_factors[item])
        return self._clamp(value)
