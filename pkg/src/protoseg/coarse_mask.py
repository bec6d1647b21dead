"""Per-image coarse foreground/background mask.

Two-way clustering of the patch features (spectral by default, direct
KMeans as a cheaper variant) followed by the border prior: the cluster
occupying the smaller fraction of grid-border cells becomes foreground.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import ProtosegError
from .tensor_store import FeatureMap

SPECTRAL = "spectral"
KMEANS_DIRECT = "kmeans"


@dataclass(frozen=True)
class CoarseMaskParams:
    method: str = SPECTRAL
    eig_count: int = 2
    kmeans_seed: int = 0
    border_width: int = 1
    normalize_eig_rows: bool = False
    drop_first_eigvec: bool = False

    def __post_init__(self):
        if self.method not in (SPECTRAL, KMEANS_DIRECT):
            raise ValueError(f"unknown clustering method {self.method!r}")
        if self.eig_count < 1:
            raise ValueError("eig_count must be >= 1")
        if self.border_width < 1:
            raise ValueError("border_width must be >= 1")


def cluster_two(fm: FeatureMap, p: CoarseMaskParams) -> np.ndarray:
    """Two-way cluster labels for the h x w patch grid."""
    h, w = fm.h, fm.w
    if h * w < 2:
        raise ValueError(f"{fm.image_id}: need at least 2 cells to cluster")
    flat = fm.data.reshape(h * w, fm.d).astype(np.float64)
    if (flat == flat[0]).all():
        # identical features: any 2-partition is arbitrary, keep one cluster
        return np.zeros((h, w), dtype=np.int64)
    try:
        if p.method == SPECTRAL:
            W = numerics.affinity_matrix(flat)
            L = numerics.normalized_laplacian(W)
            m = p.eig_count + (1 if p.drop_first_eigvec else 0)
            m = min(m, h * w)
            vecs = numerics.smallest_eigvecs(L, m)
            if p.drop_first_eigvec and vecs.shape[1] > 1:
                vecs = vecs[:, 1:]
            if p.normalize_eig_rows:
                norms = np.linalg.norm(vecs, axis=1, keepdims=True)
                vecs = np.where(norms > 0, vecs / np.maximum(norms, 1e-30), vecs)
            labels, _ = numerics.kmeans(vecs, 2, seed=p.kmeans_seed)
        else:
            labels, _ = numerics.kmeans(flat, 2, seed=p.kmeans_seed)
    except ProtosegError as e:
        raise type(e)(f"{fm.image_id}: {e}") from e
    return labels.reshape(h, w)


def border_cells(h: int, w: int, border_width: int) -> np.ndarray:
    """Boolean grid marking cells within border_width of the edge."""
    b = np.zeros((h, w), dtype=bool)
    bw = min(border_width, h, w)
    b[:bw, :] = b[-bw:, :] = True
    b[:, :bw] = b[:, -bw:] = True
    return b


def assign_foreground(labels: np.ndarray, border_width: int) -> np.ndarray:
    """Mark as foreground the cluster with the lower border-cell fraction.

    Ties go to the cluster containing the center cell; a single-cluster
    grid is all background.
    """
    labels = np.asarray(labels)
    h, w = labels.shape
    values = np.unique(labels)
    if len(values) > 2:
        raise ValueError(f"expected at most 2 clusters, got {len(values)}")
    if len(values) == 1:
        return np.zeros((h, w), dtype=np.uint8)
    border = border_cells(h, w, border_width)
    fracs = []
    for v in values:
        cells = labels == v
        fracs.append((cells & border).sum() / cells.sum())
    if fracs[0] < fracs[1]:
        fg_value = values[0]
    elif fracs[1] < fracs[0]:
        fg_value = values[1]
    else:
        fg_value = labels[h // 2, w // 2]
    return (labels == fg_value).astype(np.uint8)


def coarse_mask(fm: FeatureMap, p: CoarseMaskParams) -> np.ndarray:
    return assign_foreground(cluster_two(fm, p), p.border_width)
