"""Cosine distances, the agglomeration kernel, and dendrogram structure."""

import numpy as np
import pytest

from cobar import agglomerate, cosine_distance, cosine_distance_matrix
from cobar.clustering import Dendrogram, clusterable_users
from conftest import make_dataset, random_grid_dataset
from oracles import ward_agglomeration


class TestCosineDistance:
    def test_identical_vectors(self):
        v = np.array([1.0, 2.0, 3.0])
        assert cosine_distance(v, v) == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal_supports(self):
        assert cosine_distance(np.array([3.0, 0.0]), np.array([0.0, 2.0])) == pytest.approx(1.0)

    def test_hand_computed_pair(self):
        a = np.array([1.0, 2.0, 0.0])
        b = np.array([2.0, 1.0, 0.0])
        # dot = 4, norms = sqrt(5) each
        assert cosine_distance(a, b) == pytest.approx(1.0 - 4.0 / 5.0, abs=1e-12)

    def test_zero_norm_rejected(self):
        with pytest.raises(ValueError, match="zero-norm"):
            cosine_distance(np.zeros(3), np.array([1.0, 0.0, 0.0]))

    def test_matrix_matches_pairwise_function(self):
        rng = np.random.default_rng(6)
        ds = random_grid_dataset(rng, max_users=10)
        users = clusterable_users(ds)
        dist = cosine_distance_matrix(ds, users)
        dense = ds.sparse_by_user().toarray()
        for a in range(len(users)):
            for b in range(a + 1, len(users)):
                expected = cosine_distance(dense[users[a]], dense[users[b]])
                assert dist[a, b] == pytest.approx(expected, abs=1e-10)
        np.testing.assert_array_equal(dist, dist.T)
        assert np.all(np.diag(dist) == 0.0)


class TestAgglomerate:
    def test_single_user_degenerate(self):
        ds = make_dataset([("solo", "x", 3.0)])
        dend = agglomerate(ds)
        assert dend.n_leaves == 1
        assert len(dend.merges) == 0
        assert dend.root == 0

    def test_two_users_height_equals_distance(self):
        ds = make_dataset([("a", "x", 4.0), ("a", "y", 1.0), ("b", "x", 1.0), ("b", "y", 4.0)])
        dend = agglomerate(ds)
        assert len(dend.merges) == 1
        assert dend.merges[0].tolist() == [0, 1]
        dense = ds.sparse_by_user().toarray()
        assert dend.heights[0] == pytest.approx(cosine_distance(dense[0], dense[1]), abs=1e-12)

    def test_two_tight_pairs_merge_first(self):
        # users 0,1 share item tastes; users 2,3 share different ones
        rows = [
            ("a", "x", 4.0), ("a", "y", 3.5),
            ("b", "x", 4.0), ("b", "y", 3.0),
            ("c", "p", 2.0), ("c", "q", 4.0),
            ("d", "p", 2.0), ("d", "q", 3.5),
        ]
        dend = agglomerate(make_dataset(rows))
        first_two = {tuple(m) for m in dend.merges[:2].tolist()}
        assert first_two == {(0, 1), (2, 3)}
        assert dend.merges[2].tolist() == [4, 5]

    def test_matches_closed_form_oracle(self, kernel_backend):
        rng = np.random.default_rng(100)
        for _ in range(25):
            n = int(rng.integers(2, 12))
            d = rng.uniform(0.05, 1.9, size=(n, n))
            d = np.triu(d, 1)
            d = d + d.T
            merges, heights_sq = kernel_backend.ward_linkage(d**2)
            oracle_merges, oracle_heights = ward_agglomeration(d**2)
            np.testing.assert_array_equal(merges, oracle_merges)
            np.testing.assert_allclose(heights_sq, oracle_heights, rtol=1e-9, atol=1e-12)

    def test_exact_tie_break_lexicographic(self, kernel_backend):
        # three identical points: every pairwise distance is 0
        d2 = np.zeros((3, 3))
        merges, heights = kernel_backend.ward_linkage(d2)
        assert merges.tolist() == [[0, 1], [2, 3]]
        assert heights.tolist() == [0.0, 0.0]

    def test_backends_bit_identical(self):
        from cobar.kernels import available_backends

        backends = available_backends()
        if len(backends) < 2:
            pytest.skip("compiled backend not built")
        rng = np.random.default_rng(41)
        for _ in range(10):
            n = int(rng.integers(2, 40))
            d = rng.uniform(0.0, 2.0, size=(n, n))
            d = np.triu(d, 1)
            d = d + d.T
            results = [mod.ward_linkage(d**2) for mod in backends.values()]
            for merges, heights in results[1:]:
                np.testing.assert_array_equal(merges, results[0][0])
                np.testing.assert_array_equal(heights, results[0][1])

    def test_empty_dataset_rejected(self):
        ds = make_dataset([("a", "x", 3.0)]).subset(np.array([], dtype=int))
        with pytest.raises(ValueError):
            agglomerate(ds)

    def test_users_without_ratings_excluded(self):
        ds = make_dataset([("a", "x", 3.0), ("b", "x", 2.0), ("c", "y", 4.0)])
        train = ds.subset(np.array([0, 1]))   # user c has no train ratings
        dend = agglomerate(train)
        assert dend.n_leaves == 2
        assert dend.leaf_users.tolist() == [0, 1]


def check_dendrogram_invariants(dend: Dendrogram):
    n = dend.n_leaves
    assert dend.merges.shape == (n - 1, 2)
    assert sorted(dend.leaves_under(dend.root).tolist()) == list(range(n))
    # each node is merged away at most once; root has no parent
    children = dend.merges.ravel().tolist()
    assert len(children) == len(set(children))
    assert dend.parents[dend.root] == -1
    assert np.all(dend.parents[:-1] >= 0) if n > 1 else True
    # heights never decrease
    assert np.all(np.diff(dend.heights) >= 0.0)
    # sibling memberships are disjoint and union to the parent
    for m, (left, right) in enumerate(dend.merges):
        node = n + m
        left_set = set(dend.leaves_under(int(left)).tolist())
        right_set = set(dend.leaves_under(int(right)).tolist())
        assert not left_set & right_set
        assert left_set | right_set == set(dend.leaves_under(node).tolist())
        assert dend.sizes[node] == len(left_set) + len(right_set)


class TestDendrogramStructure:
    def test_invariants_on_random_datasets(self):
        rng = np.random.default_rng(77)
        for _ in range(30):
            ds = random_grid_dataset(rng, max_users=14, max_items=10)
            check_dendrogram_invariants(agglomerate(ds))

    def test_deterministic_across_runs(self):
        rng = np.random.default_rng(53)
        ds = random_grid_dataset(rng, max_users=15)
        a = agglomerate(ds)
        b = agglomerate(ds)
        np.testing.assert_array_equal(a.merges, b.merges)
        np.testing.assert_array_equal(a.heights, b.heights)

    def test_ancestor_chain_two_users(self):
        ds = make_dataset([("a", "x", 4.0), ("b", "y", 3.0)])
        dend = agglomerate(ds)
        assert dend.ancestor_chain(0).tolist() == [0, 2]

    def test_all_chains_end_at_root(self):
        rng = np.random.default_rng(60)
        ds = random_grid_dataset(rng, max_users=12)
        dend = agglomerate(ds)
        for leaf in range(dend.n_leaves):
            chain = dend.ancestor_chain(leaf)
            assert chain[0] == leaf
            assert chain[-1] == dend.root
            # consecutive entries are child -> parent
            for child, parent in zip(chain[:-1], chain[1:]):
                assert dend.parents[child] == parent

    def test_demo_fixture_chain_topology(self, demo_dataset):
        # the shipped 5-user fixture: the active user pairs up first, gains a
        # third member, and only meets the remaining pair at the root
        dend = agglomerate(demo_dataset)
        chain = dend.ancestor_chain(0)
        assert chain.tolist() == [0, 5, 6, 8]
        assert dend.sizes[chain].tolist() == [1, 2, 3, 5]

    def test_unknown_leaf_rejected(self):
        ds = make_dataset([("a", "x", 4.0), ("b", "y", 3.0)])
        with pytest.raises(ValueError):
            agglomerate(ds).ancestor_chain(5)

    def test_export_format(self, tmp_path):
        ds = make_dataset([("a", "x", 4.0), ("a", "y", 1.0), ("b", "x", 1.0), ("b", "y", 4.0)])
        dend = agglomerate(ds)
        path = tmp_path / "tree.txt"
        dend.save(path)
        lines = path.read_text().splitlines()
        assert len(lines) == 1
        left, right, height, new_id = lines[0].split()
        assert (int(left), int(right), int(new_id)) == (0, 1, 2)
        assert float(height) == dend.heights[0]
