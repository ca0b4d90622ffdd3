import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clusterconquer.clustering import (
    ClusterAssignment,
    canonical,
    clustering_error,
    knn_graph,
    knn_graph_partition,
    knn_indices,
    lowrank_cluster,
    random_assignment,
    read_assignment,
    spectral_cluster,
    write_assignment,
)
from clusterconquer.errors import ClusterCountError, RankError, ShapeError


def planted(k, reps, d, rng, spread=0.0, scale=10.0):
    centers = rng.normal(size=(d, k)) * scale
    labels = np.repeat(np.arange(k), reps)
    X = centers[:, labels] + spread * rng.normal(size=(d, labels.size))
    perm = rng.permutation(labels.size)
    return X[:, perm], labels[perm]


class TestSpectral:
    def test_repeated_columns(self, rng):
        X, truth = planted(3, [2, 4, 1], 5, rng)
        assert clustering_error(spectral_cluster(X, 3), truth) == 0

    def test_single_cluster(self, rng):
        assert np.all(spectral_cluster(rng.normal(size=(3, 9)), 1).labels == 0)

    def test_k_exceeds_dimension(self, rng):
        X, truth = planted(4, 5, 2, rng, spread=0.01)
        assert clustering_error(spectral_cluster(X, 4), truth) == 0

    @pytest.mark.parametrize("k", [0, 11])
    def test_bad_k(self, rng, k):
        with pytest.raises(RankError):
            spectral_cluster(rng.normal(size=(3, 10)), k)

    @pytest.mark.slow
    def test_gaussian_mixture_recovery(self):
        ok = 0
        for trial in range(100):
            rng = np.random.default_rng(trial)
            d, k, n = 8, 3, 300
            centers = rng.normal(size=(d, k))
            # rescale so the closest pair is 20 noise units apart
            gaps = [np.linalg.norm(centers[:, a] - centers[:, b]) for a in range(k) for b in range(a)]
            centers *= 20.0 / min(gaps)
            labels = rng.permutation(np.arange(n) % k)
            X = centers[:, labels] + rng.normal(size=(d, n))
            ok += clustering_error(spectral_cluster(X, k, seed=trial), labels) == 0
        assert ok >= 99

    def test_rotation_invariance(self, rng):
        X, _ = planted(3, 6, 4, rng, spread=0.5, scale=3.0)
        Q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
        a = spectral_cluster(X, 3, seed=1)
        b = spectral_cluster(Q @ X, 3, seed=1)
        assert clustering_error(a, b) == 0


class TestLowRank:
    def test_repeated_columns(self, rng):
        X, truth = planted(2, 4, 3, rng)
        assert clustering_error(lowrank_cluster(X, 2), truth) == 0

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.integers(2, 3))
    def test_equivalent_to_spectral_when_exact(self, seed, k):
        X = np.random.default_rng(seed).normal(size=(4, 8))
        a = spectral_cluster(X, k, method="exhaustive")
        b = lowrank_cluster(X, k, method="exhaustive")
        assert clustering_error(a, b) == 0


class TestKnnGraph:
    def test_tie_breaks_to_lower_index(self):
        pts = np.array([[0.0], [1.0], [-1.0], [5.0]])
        assert knn_indices(pts, 1)[0, 0] == 1

    def test_symmetric(self, rng):
        A = knn_graph(rng.normal(size=(30, 2)), 3)
        np.testing.assert_array_equal(A, A.T)
        assert np.all(np.diag(A) == 0) and np.all(A.sum(1) >= 3)

    def test_two_groups(self, rng):
        X, truth = planted(2, 5, 3, rng)
        assert clustering_error(knn_graph_partition(X, 2, K=3), truth) == 0

    def test_singletons(self, rng):
        res = knn_graph_partition(rng.normal(size=(2, 7)), 7, K=2, balanced=False)
        assert sorted(res.labels) == list(range(7))

    @pytest.mark.slow
    def test_planted_four_clusters(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            X, truth = planted(4, 50, 5, rng, spread=1.0, scale=4.0)
            assert clustering_error(knn_graph_partition(X, 4, K=11, seed=seed), truth) <= 10

    def test_balance_cap(self, rng):
        X = np.hstack([rng.normal(size=(2, 40)), rng.normal(size=(2, 5)) + 20])
        res = knn_graph_partition(X, 3, K=5)
        assert res.sizes().max() <= int(np.ceil(1.3 * 45 / 3))
        assert res.sizes().sum() == 45

    def test_errors(self, rng):
        with pytest.raises(ClusterCountError):
            knn_graph_partition(rng.normal(size=(2, 3)), 4, K=1)
        with pytest.raises(ValueError):
            knn_graph_partition(rng.normal(size=(2, 3)), 2, K=3)


class TestError:
    def test_identity(self):
        assert clustering_error([0, 1, 1, 2], [0, 1, 1, 2]) == 0

    def test_relabelling(self):
        assert clustering_error([1, 1, 2, 2], [2, 2, 1, 1]) == 0

    def test_enumerated(self):
        assert clustering_error([1, 1, 2, 2], [1, 2, 1, 2]) == 2

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            clustering_error([0, 1], [0, 1, 1])

    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 8), st.integers(1, 30))
    def test_hungarian_matches_enumeration(self, seed, k, n):
        rng = np.random.default_rng(seed)
        a, b = rng.integers(0, k, n), rng.integers(0, k, n)
        e = clustering_error(a, b, method="exhaustive")
        assert e == clustering_error(a, b, method="hungarian")
        assert e == clustering_error(b, a, method="hungarian")
        perm = rng.permutation(k)
        assert e == clustering_error(perm[a], b)
        assert 0 <= e <= n


def test_random_assignment_balanced():
    res = random_assignment(23, 5, seed=3)
    assert res.sizes().max() - res.sizes().min() <= 1
    np.testing.assert_array_equal(res.labels, random_assignment(23, 5, seed=3).labels)


def test_canonical():
    c = canonical([5, 5, 2, 9, 2])
    np.testing.assert_array_equal(c.labels, [0, 0, 1, 2, 1])
    assert c.k == 3


def test_assignment_round_trip(tmp_path):
    a = ClusterAssignment([0, 2, 1, 2], 3)
    write_assignment(a, ["a", "b", "c", "d"], tmp_path / "a.csv")
    ids, back = read_assignment(tmp_path / "a.csv")
    assert ids == ["a", "b", "c", "d"]
    np.testing.assert_array_equal(back.labels, a.labels)
