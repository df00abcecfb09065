"""Agglomerative user hierarchy: Ward linkage over cosine distances.

Users are represented by their rating vectors over the full item space
(zero where unrated).  The merge loop applies the Lance-Williams recurrence
with Ward coefficients to the *squared* cosine distances; reported merge
heights are the square roots of those linkage values, so the two-user case
degenerates to the plain pairwise distance.

Ties in the minimal linkage are broken by the lexicographically smallest
(node id, node id) pair, making the hierarchy deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .data import RatingDataset


def cosine_distance(a: np.ndarray, b: np.ndarray) -> float:
    """1 - cos(a, b) for two rating vectors; in [0, 2], and [0, 1] for
    nonnegative ratings.  Raises on a zero-norm vector."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = float(np.sqrt(a @ a))
    nb = float(np.sqrt(b @ b))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine distance undefined for a zero-norm rating vector")
    cos = float(a @ b) / (na * nb)
    return 1.0 - min(max(cos, -1.0), 1.0)


def cosine_distance_matrix(dataset: RatingDataset, users: np.ndarray | None = None) -> np.ndarray:
    """Dense pairwise cosine distances between the given users' rating vectors.

    Uses a sparse self-product, so the cost is driven by the number of
    ratings rather than n_users * n_items.  All listed users must have at
    least one nonzero rating.
    """
    R = dataset.sparse_by_user()
    if users is not None:
        R = R[np.asarray(users)]
    norms = np.sqrt(np.asarray(R.multiply(R).sum(axis=1)).ravel())
    if np.any(norms == 0.0):
        bad = int(np.flatnonzero(norms == 0.0)[0])
        raise ValueError(f"user at position {bad} has a zero-norm rating vector")
    S = np.asarray((R @ R.T).todense(), dtype=np.float64)
    cos = S / norms[:, None] / norms[None, :]
    dist = 1.0 - np.clip(cos, -1.0, 1.0)
    np.clip(dist, 0.0, 2.0, out=dist)
    # exact symmetry so the merge loop's tie handling sees one value per pair
    upper = np.triu(dist, 1)
    return upper + upper.T


@dataclass
class Dendrogram:
    """Binary merge tree; leaves 0..n-1 are users, node n+m is merge m."""

    n_leaves: int
    merges: np.ndarray      # (n-1, 2) int64 node ids, row-sorted
    heights: np.ndarray     # (n-1,) float64, non-decreasing
    leaf_users: np.ndarray  # (n_leaves,) dataset user index per leaf
    parents: np.ndarray = field(init=False, repr=False)
    sizes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.n_leaves
        total = 2 * n - 1 if n else 0
        parents = np.full(total, -1, dtype=np.int64)
        sizes = np.ones(total, dtype=np.int64)
        for m, (left, right) in enumerate(self.merges):
            new = n + m
            parents[left] = new
            parents[right] = new
            sizes[new] = sizes[left] + sizes[right]
        self.parents = parents
        self.sizes = sizes

    @property
    def n_nodes(self) -> int:
        return 2 * self.n_leaves - 1 if self.n_leaves else 0

    @property
    def root(self) -> int:
        return self.n_nodes - 1

    def children(self, node: int) -> tuple[int, int] | None:
        """(left, right) ids for an internal node, None for a leaf."""
        if node < self.n_leaves:
            return None
        left, right = self.merges[node - self.n_leaves]
        return int(left), int(right)

    def ancestor_chain(self, leaf: int) -> np.ndarray:
        """Node ids from the user's leaf up to the root, inclusive."""
        if not 0 <= leaf < self.n_leaves:
            raise ValueError(f"leaf index {leaf} out of range [0, {self.n_leaves})")
        chain = [leaf]
        node = leaf
        while self.parents[node] != -1:
            node = int(self.parents[node])
            chain.append(node)
        return np.asarray(chain, dtype=np.int64)

    def leaves_under(self, node: int) -> np.ndarray:
        """Leaf ids contained in the cluster rooted at `node`."""
        if not 0 <= node < self.n_nodes:
            raise ValueError(f"node {node} out of range [0, {self.n_nodes})")
        out = []
        stack = [node]
        while stack:
            cur = stack.pop()
            if cur < self.n_leaves:
                out.append(cur)
            else:
                left, right = self.merges[cur - self.n_leaves]
                stack.append(int(right))
                stack.append(int(left))
        return np.asarray(out, dtype=np.int64)

    def save(self, path: str | Path) -> None:
        """Text export, one merge per line: `left right height new_id`."""
        with open(path, "w", encoding="utf-8") as fh:
            for m, ((left, right), h) in enumerate(zip(self.merges, self.heights)):
                fh.write(f"{left} {right} {float(h)!r} {self.n_leaves + m}\n")


def clusterable_users(dataset: RatingDataset) -> np.ndarray:
    """Users with at least one rating and a nonzero rating vector."""
    counts = np.bincount(dataset.users, minlength=dataset.n_users)
    norms = np.zeros(dataset.n_users)
    np.add.at(norms, dataset.users, dataset.ratings**2)
    return np.flatnonzero((counts > 0) & (norms > 0.0))


def agglomerate(
    dataset: RatingDataset,
    users: np.ndarray | None = None,
    ward_linkage=None,
) -> Dendrogram:
    """Cluster the dataset's users into a full merge hierarchy.

    `users` defaults to every clusterable user, in ascending index order.
    `ward_linkage` overrides the kernel backend (used by tests and the
    benchmark); the default is the backend selected at import.
    """
    if dataset.n_ratings == 0:
        raise ValueError("cannot cluster an empty dataset")
    if users is None:
        users = clusterable_users(dataset)
    users = np.asarray(users, dtype=np.int64)
    if len(users) == 0:
        raise ValueError("no users with ratings to cluster")
    kernel = ward_linkage if ward_linkage is not None else kernels.ward_linkage

    dist = cosine_distance_matrix(dataset, users)
    merges, heights_sq = kernel(dist**2)
    heights = np.sqrt(np.maximum(heights_sq, 0.0))
    return Dendrogram(
        n_leaves=len(users),
        merges=merges,
        heights=heights,
        leaf_users=users,
    )
