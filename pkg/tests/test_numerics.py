import itertools

import numpy as np
import pytest

from protoseg.errors import DegenerateVectorError
from protoseg.numerics import (
    _lanczos_smallest,
    affinity_matrix,
    cosine,
    histogram_peak,
    kmeans,
    kmeans_sse,
    normalized_laplacian,
    smallest_eigpairs,
    smallest_eigvecs,
)


class TestCosine:
    def test_self_similarity(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            v = rng.standard_normal(8)
            assert cosine(v, v) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        assert cosine([1, 0], [0, 1]) == pytest.approx(0.0, abs=1e-12)

    def test_analytic(self):
        assert cosine([1, 0], [1, 1]) == pytest.approx(0.70710678, abs=1e-6)

    def test_zero_norm(self):
        with pytest.raises(DegenerateVectorError):
            cosine([0, 0], [1, 0])


class TestAffinity:
    def test_orthogonal_pair(self):
        W = affinity_matrix(np.array([[1.0, 0.0], [0.0, 1.0]]))
        assert np.allclose(W, np.eye(2))

    def test_negative_clamped(self):
        W = affinity_matrix(np.array([[1.0, 0.0], [-1.0, 0.0]]))
        assert W[0, 1] == 0.0 and W[1, 0] == 0.0

    def test_matches_scalar_loop_oracle(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((6, 4))
        W = affinity_matrix(X)
        for i in range(6):
            for j in range(6):
                expect = max(cosine(X[i], X[j]), 0.0)
                assert W[i, j] == pytest.approx(expect, abs=1e-6)

    def test_invariants(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            W = affinity_matrix(rng.standard_normal((10, 6)))
            assert np.allclose(W, W.T, atol=1e-6)
            assert (W >= 0).all() and (W <= 1).all()
            assert np.allclose(np.diag(W), 1.0)

    def test_zero_row_reports_index(self):
        X = np.ones((3, 2))
        X[1] = 0
        with pytest.raises(DegenerateVectorError, match="row 1"):
            affinity_matrix(X)


class TestLaplacian:
    def test_identity_affinity(self):
        assert np.allclose(normalized_laplacian(np.eye(2)), np.zeros((2, 2)))

    def test_analytic_2x2(self):
        L = normalized_laplacian(np.ones((2, 2)))
        assert np.allclose(L, [[0.5, -0.5], [-0.5, 0.5]])

    def test_spectrum_bounds(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            W = affinity_matrix(rng.standard_normal((12, 8)))
            L = normalized_laplacian(W)
            assert np.allclose(L, L.T, atol=1e-6)
            vals = np.linalg.eigvalsh(L)
            assert vals.min() >= -1e-6 and vals.max() <= 2 + 1e-6


class TestEigensolver:
    def test_zero_matrix(self):
        vals, vecs = smallest_eigpairs(np.zeros((4, 4)), 1)
        assert vals[0] == pytest.approx(0.0, abs=1e-12)
        assert np.linalg.norm(vecs[:, 0]) == pytest.approx(1.0, abs=1e-10)

    def test_analytic_2x2(self):
        L = np.array([[0.5, -0.5], [-0.5, 0.5]])
        vals, vecs = smallest_eigpairs(L, 2)
        assert np.allclose(vals, [0.0, 1.0], atol=1e-10)
        v0 = vecs[:, 0]
        assert abs(abs(v0 @ [1, 1]) / np.sqrt(2) - 1.0) < 1e-10

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(6)
        A = rng.standard_normal((20, 20))
        L = (A + A.T) / 2
        vals, vecs = smallest_eigpairs(L, 5)
        oracle = np.linalg.eigvalsh(L)[:5]
        assert np.allclose(vals, oracle, atol=1e-6)
        for i in range(5):
            v = vecs[:, i]
            assert np.linalg.norm(L @ v - vals[i] * v) <= 1e-5 * np.linalg.norm(v)

    def test_lanczos_path_matches_dense(self):
        rng = np.random.default_rng(7)
        A = rng.standard_normal((80, 80))
        L = (A + A.T) / 2
        vals, vecs = _lanczos_smallest(L, 4)
        oracle = np.linalg.eigvalsh(L)[:4]
        assert np.allclose(vals, oracle, atol=1e-6)
        # orthonormal columns and small residuals
        assert np.allclose(vecs.T @ vecs, np.eye(4), atol=1e-5)
        for i in range(4):
            v = vecs[:, i]
            assert np.linalg.norm(L @ v - vals[i] * v) <= 1e-5 * np.linalg.norm(v)

    def test_ascending_order(self):
        rng = np.random.default_rng(8)
        A = rng.standard_normal((15, 15))
        vals, _ = smallest_eigpairs((A + A.T) / 2, 6)
        assert (np.diff(vals) >= -1e-12).all()

    def test_smallest_eigvecs_shape(self):
        assert smallest_eigvecs(np.eye(5), 3).shape == (5, 3)


def brute_force_best_2partition(X):
    """Exhaustively minimize within-cluster SSE over all 2-partitions."""
    n = len(X)
    best, best_sse = None, np.inf
    for bits in range(1, 2 ** (n - 1)):
        sel = np.array([(bits >> i) & 1 for i in range(n)], dtype=bool)
        sse = 0.0
        for part in (X[sel], X[~sel]):
            if len(part):
                sse += ((part - part.mean(axis=0)) ** 2).sum()
        if sse < best_sse:
            best, best_sse = sel, sse
    return best


class TestKMeans:
    def test_separates_two_groups(self):
        rng = np.random.default_rng(9)
        a = np.zeros((5, 2)) + rng.uniform(-0.01, 0.01, (5, 2))
        b = np.full((5, 2), 10.0) + rng.uniform(-0.01, 0.01, (5, 2))
        X = np.vstack([a, b])
        labels, _ = kmeans(X, 2, seed=0)
        oracle = brute_force_best_2partition(X)
        assert (labels == labels[0]).sum() in (5,)
        agree = (labels.astype(bool) == oracle).all() or (labels.astype(bool) == ~oracle).all()
        assert agree

    def test_singleton(self):
        labels, centroids = kmeans(np.array([[3.0, 4.0]]), 1, seed=0)
        assert labels.tolist() == [0]
        assert np.allclose(centroids[0], [3.0, 4.0])

    def test_identical_points(self):
        X = np.ones((6, 3))
        labels, centroids = kmeans(X, 2, seed=1)
        assert set(labels.tolist()) <= {0, 1}
        assert np.allclose(centroids, 1.0)

    def test_deterministic(self):
        rng = np.random.default_rng(10)
        X = rng.standard_normal((30, 4))
        l1, c1 = kmeans(X, 3, seed=42)
        l2, c2 = kmeans(X, 3, seed=42)
        assert (l1 == l2).all() and np.allclose(c1, c2)

    def test_labels_are_nearest_centroid(self):
        rng = np.random.default_rng(11)
        X = rng.standard_normal((40, 3))
        labels, centroids = kmeans(X, 4, seed=0)
        d2 = ((X[:, None, :] - centroids[None]) ** 2).sum(axis=2)
        assert (labels == d2.argmin(axis=1)).all()

    def test_sse_not_worse_than_init(self):
        rng = np.random.default_rng(12)
        X = rng.standard_normal((25, 2))
        labels, centroids = kmeans(X, 3, seed=5)
        final = kmeans_sse(X, labels, centroids)
        init_labels, init_centroids = kmeans(X, 3, seed=5, max_iter=1)
        assert final <= kmeans_sse(X, init_labels, init_centroids) + 1e-9


class TestHistogramPeak:
    def test_constant_input(self):
        assert histogram_peak([0.5] * 10, 50) == 0.5

    def test_planted_peak(self):
        rng = np.random.default_rng(13)
        vals = np.concatenate([
            0.8 + rng.uniform(-0.01, 0.01, 90),
            0.2 + rng.uniform(-0.01, 0.01, 10),
        ])
        thr = histogram_peak(vals, 50)
        assert 0.78 <= thr <= 0.82
        # direct histogram count oracle
        counts, edges = np.histogram(vals, bins=50, range=(vals.min(), vals.max()))
        idx = counts.argmax()
        assert thr == pytest.approx((edges[idx] + edges[idx + 1]) / 2)

    def test_tie_breaks_low(self):
        # two bins, one value in each: tie -> lower bin center
        thr = histogram_peak([0.0, 1.0], 2)
        assert thr == pytest.approx(0.25)

    def test_within_range(self):
        rng = np.random.default_rng(14)
        for _ in range(10):
            vals = rng.standard_normal(rng.integers(1, 40))
            thr = histogram_peak(vals, int(rng.integers(1, 20)))
            assert vals.min() <= thr <= vals.max()

    def test_empty_input(self):
        with pytest.raises(ValueError):
            histogram_peak([], 10)
