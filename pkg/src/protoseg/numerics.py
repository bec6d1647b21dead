"""Shared numerical kernels.

Cosine similarity, affinity/Laplacian construction, a symmetric
eigensolver (dense below ``DENSE_CUTOFF``, Lanczos with full
reorthogonalization above), seeded KMeans, and histogram peak finding.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError, DegenerateVectorError

DENSE_CUTOFF = 2048
LANCZOS_MAX_ITER = 1000
KMEANS_MAX_ITER = 300


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise DegenerateVectorError("cosine of a zero-norm vector is undefined")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def affinity_matrix(flat_features) -> np.ndarray:
    """Pairwise cosine similarity with negative values clamped to 0.

    Returns a symmetric (N, N) matrix with unit diagonal and entries in
    [0, 1].
    """
    X = np.asarray(flat_features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError(f"expected (N, d) with N >= 2, got shape {X.shape}")
    norms = np.linalg.norm(X, axis=1)
    bad = np.flatnonzero(norms == 0.0)
    if bad.size:
        raise DegenerateVectorError(f"zero-norm feature at row {bad[0]}")
    Xn = X / norms[:, None]
    W = np.clip(Xn @ Xn.T, 0.0, 1.0)
    W = (W + W.T) / 2.0
    np.fill_diagonal(W, 1.0)
    return W


def normalized_laplacian(W) -> np.ndarray:
    """D^{-1/2} (D - W) D^{-1/2} with D the diagonal degree matrix."""
    W = np.asarray(W, dtype=np.float64)
    deg = W.sum(axis=1)
    if (deg <= 0.0).any():
        raise DegenerateVectorError("isolated node: zero row sum in affinity matrix")
    inv_sqrt = 1.0 / np.sqrt(deg)
    L = (np.diag(deg) - W) * inv_sqrt[:, None] * inv_sqrt[None, :]
    return (L + L.T) / 2.0


def smallest_eigpairs(L, m: int) -> tuple[np.ndarray, np.ndarray]:
    """The m smallest eigenvalues and eigenvectors of a symmetric matrix.

    Dense decomposition up to DENSE_CUTOFF; Lanczos with full
    reorthogonalization above.  Eigenvalues ascend; eigenvectors are the
    columns of the returned (N, m) matrix.
    """
    L = np.asarray(L, dtype=np.float64)
    n = L.shape[0]
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= {n}, got m={m}")
    if n <= DENSE_CUTOFF:
        vals, vecs = np.linalg.eigh(L)
        return vals[:m], vecs[:, :m]
    return _lanczos_smallest(L, m)


def smallest_eigvecs(L, m: int) -> np.ndarray:
    return smallest_eigpairs(L, m)[1]


def _lanczos_smallest(L, m, max_iter=LANCZOS_MAX_ITER, tol=1e-7):
    n = L.shape[0]
    rng = np.random.default_rng(0x1A2C)
    q = rng.standard_normal(n)
    q /= np.linalg.norm(q)
    Q = [q]
    alphas: list[float] = []
    betas: list[float] = []
    scale = max(np.abs(L).max(), 1.0)
    for it in range(min(max_iter, n)):
        v = L @ Q[-1]
        alphas.append(float(Q[-1] @ v))
        v -= alphas[-1] * Q[-1]
        if len(Q) > 1:
            v -= betas[-1] * Q[-2]
        # full reorthogonalization, twice for stability
        for _ in range(2):
            v -= np.column_stack(Q) @ (np.column_stack(Q).T @ v)
        beta = np.linalg.norm(v)
        k = len(alphas)
        if k >= m and (k % 5 == 0 or beta <= 1e-12 * scale or k == min(max_iter, n)):
            T = np.diag(alphas) + np.diag(betas, 1) + np.diag(betas, -1)
            tvals, tvecs = np.linalg.eigh(T)
            # residual bound: beta * |last component of tridiagonal eigenvector|
            resid = beta * np.abs(tvecs[-1, :m])
            if (resid <= tol * scale).all() or beta <= 1e-12 * scale:
                basis = np.column_stack(Q)
                vecs = basis @ tvecs[:, :m]
                vecs /= np.linalg.norm(vecs, axis=0)
                return tvals[:m], vecs
        if beta <= 1e-12 * scale:
            # invariant subspace found but not enough Ritz pairs: restart direction
            v = rng.standard_normal(n)
            for _ in range(2):
                v -= np.column_stack(Q) @ (np.column_stack(Q).T @ v)
            beta = np.linalg.norm(v)
        betas.append(beta)
        Q.append(v / beta)
    raise ConvergenceError(
        f"Lanczos did not converge for {m} eigenpairs of a {n}x{n} matrix "
        f"after {max_iter} iterations (last residual bound {float(resid.max()):.3e})"
    )


def _kmeans_pp_init(X, k, rng):
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]), dtype=np.float64)
    centroids[0] = X[rng.integers(n)]
    dist = ((X - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = dist.sum()
        if total > 0:
            probs = dist / total
            idx = int(rng.choice(n, p=probs))
        else:
            idx = int(rng.integers(n))
        centroids[i] = X[idx]
        dist = np.minimum(dist, ((X - centroids[i]) ** 2).sum(axis=1))
    return centroids


def kmeans(points, k: int, seed: int = 0, max_iter: int = KMEANS_MAX_ITER):
    """Seeded k-means++ / Lloyd iteration.

    Deterministic for a fixed seed.  An empty cluster is re-seeded from
    the point farthest from its assigned centroid.  Returns (labels,
    centroids).
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected (N, m) points, got shape {X.shape}")
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= {n}, got k={k}")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(X, k, rng)
    labels = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iter):
        d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(d2, axis=1)
        for c in range(k):
            if not (new_labels == c).any():
                farthest = int(np.argmax(d2[np.arange(n), new_labels]))
                centroids[c] = X[farthest]
                new_labels[farthest] = c
        if (new_labels == labels).all():
            break
        labels = new_labels
        for c in range(k):
            members = X[labels == c]
            if len(members):
                centroids[c] = members.mean(axis=0)
    return labels, centroids


def kmeans_sse(points, labels, centroids) -> float:
    X = np.asarray(points, dtype=np.float64)
    return float(((X - np.asarray(centroids)[labels]) ** 2).sum())


def histogram_peak(values, bins: int) -> float:
    """Center of the fullest bin of a uniform histogram over the data range.

    Ties break toward the lower bin; a single-valued input returns that
    value.
    """
    vals = np.asarray(values, dtype=np.float64).ravel()
    if vals.size == 0:
        raise ValueError("histogram_peak of empty input")
    if bins < 1:
        raise ValueError(f"need bins >= 1, got {bins}")
    lo, hi = float(vals.min()), float(vals.max())
    if lo == hi:
        return lo
    counts, edges = np.histogram(vals, bins=bins, range=(lo, hi))
    idx = int(np.argmax(counts))  # argmax takes the lowest index on ties
    return float((edges[idx] + edges[idx + 1]) / 2.0)
