"""Multi-view KNN retrieval against the prototype libraries.

Exact top-K cosine search over unit-normalized prototypes with per-cell
voting, spatial view transforms (flips and rotations) with exact
inverses, majority fusion of the per-view masks, and nearest-neighbor
mask upsampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DegenerateVectorError, ShapeError
from .tensor_store import FOREGROUND, FeatureMap, PrototypeLibrary


class View(Enum):
    IDENTITY = "identity"
    HFLIP = "hflip"
    VFLIP = "vflip"
    ROT90 = "rot90"
    ROT180 = "rot180"
    ROT270 = "rot270"


ALL_VIEWS = tuple(View)

_INVERSE = {
    View.IDENTITY: View.IDENTITY,
    View.HFLIP: View.HFLIP,
    View.VFLIP: View.VFLIP,
    View.ROT90: View.ROT270,
    View.ROT180: View.ROT180,
    View.ROT270: View.ROT90,
}


def inverse(v: View) -> View:
    return _INVERSE[v]


def transform_grid(arr: np.ndarray, v: View) -> np.ndarray:
    """Spatial transform of an (h, w, ...) array.  rot90 maps cell (i, j)
    to (j, h-1-i) and swaps the grid dims; channels ride along."""
    if v is View.IDENTITY:
        out = arr
    elif v is View.HFLIP:
        out = arr[:, ::-1]
    elif v is View.VFLIP:
        out = arr[::-1]
    elif v is View.ROT90:
        out = np.rot90(arr, k=-1, axes=(0, 1))
    elif v is View.ROT180:
        out = np.rot90(arr, k=2, axes=(0, 1))
    else:
        out = np.rot90(arr, k=1, axes=(0, 1))
    return np.ascontiguousarray(out)


def transform_fm(fm: FeatureMap, v: View) -> FeatureMap:
    return FeatureMap(
        image_id=fm.image_id,
        data=transform_grid(fm.data, v),
        orig_h=fm.orig_h,
        orig_w=fm.orig_w,
    )


def transform_mask(m: np.ndarray, v: View) -> np.ndarray:
    return transform_grid(np.asarray(m), v)


@dataclass(frozen=True)
class RetrievalIndex:
    unit_prototypes: np.ndarray  # (n, d) unit-normalized float64
    is_foreground: np.ndarray  # (n,) bool

    @property
    def size(self) -> int:
        return self.unit_prototypes.shape[0]

    @property
    def d(self) -> int:
        return self.unit_prototypes.shape[1]


@dataclass(frozen=True)
class RetrievalParams:
    top_k: int = 512
    views: tuple[View, ...] = ALL_VIEWS
    fg_tie_break: bool = True

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if View.IDENTITY not in self.views:
            raise ValueError("views must contain the identity view")


def build_index(fg_lib: PrototypeLibrary, bg_lib: PrototypeLibrary) -> RetrievalIndex:
    if fg_lib.n and bg_lib.n and fg_lib.d != bg_lib.d:
        raise ShapeError(f"library dimension mismatch: {fg_lib.d} vs {bg_lib.d}")
    if fg_lib.n + bg_lib.n < 1:
        raise ValueError("cannot build an index from two empty libraries")
    protos = [lib.prototypes.astype(np.float64) for lib in (fg_lib, bg_lib) if lib.n]
    stacked = np.concatenate(protos, axis=0)
    norms = np.linalg.norm(stacked, axis=1)
    if (norms == 0.0).any():
        raise DegenerateVectorError("zero-norm prototype in library")
    is_fg = np.zeros(stacked.shape[0], dtype=bool)
    is_fg[:fg_lib.n] = fg_lib.category == FOREGROUND
    return RetrievalIndex(unit_prototypes=stacked / norms[:, None], is_foreground=is_fg)


def _vote_batch(queries: np.ndarray, idx: RetrievalIndex, top_k: int, fg_tie_break: bool):
    """Vectorized top-K vote for a (q, d) batch of queries.

    Similarity ties at the K-th rank break toward the lower prototype
    index (stable sort on descending similarity).  Returns (labels,
    fg_votes, bg_votes).
    """
    norms = np.linalg.norm(queries, axis=1)
    if (norms == 0.0).any():
        raise DegenerateVectorError(
            f"zero-norm query vector at row {int(np.flatnonzero(norms == 0.0)[0])}"
        )
    unit = queries / norms[:, None]
    sims = unit @ idx.unit_prototypes.T  # (q, n)
    k = min(top_k, idx.size)
    order = np.argsort(-sims, axis=1, kind="stable")[:, :k]
    fg_votes = idx.is_foreground[order].sum(axis=1)
    bg_votes = k - fg_votes
    if fg_tie_break:
        labels = (fg_votes >= bg_votes).astype(np.uint8)
    else:
        labels = (fg_votes > bg_votes).astype(np.uint8)
    return labels, fg_votes, bg_votes


def knn_vote(f, idx: RetrievalIndex, top_k: int, fg_tie_break: bool = True):
    """Top-K cosine vote for one query.  Returns (label, fg_votes, bg_votes)."""
    q = np.asarray(f, dtype=np.float64).reshape(1, -1)
    labels, fg_votes, bg_votes = _vote_batch(q, idx, top_k, fg_tie_break)
    return int(labels[0]), int(fg_votes[0]), int(bg_votes[0])


def label_grid(data: np.ndarray, idx: RetrievalIndex, p: RetrievalParams) -> np.ndarray:
    """Per-cell KNN-vote labels for an (h, w, d) feature grid."""
    h, w, d = data.shape
    flat = data.reshape(h * w, d).astype(np.float64)
    labels, _, _ = _vote_batch(flat, idx, p.top_k, p.fg_tie_break)
    return labels.reshape(h, w)


def retrieve_mask(fm: FeatureMap, idx: RetrievalIndex, p: RetrievalParams,
                  view: View = View.IDENTITY) -> np.ndarray:
    """KNN-vote mask for one view, returned in normal orientation."""
    viewed = transform_grid(fm.data, view)
    labels = label_grid(viewed, idx, p)
    return transform_mask(labels, inverse(view)).astype(np.uint8)


def fuse_votes(fg_counts: np.ndarray, n_views: int, fg_tie_break: bool) -> np.ndarray:
    """Per-cell majority over n_views foreground counts; ties go to
    foreground iff fg_tie_break."""
    counts = np.asarray(fg_counts)
    fused = counts * 2 > n_views
    if fg_tie_break:
        fused = fused | (counts * 2 == n_views)
    return fused.astype(np.uint8)


def mvkr_mask(fm: FeatureMap, idx: RetrievalIndex, p: RetrievalParams) -> np.ndarray:
    """Per-cell majority vote over all per-view masks."""
    total = np.zeros((fm.h, fm.w), dtype=np.int64)
    for view in p.views:
        total += retrieve_mask(fm, idx, p, view)
    return fuse_votes(total, len(p.views), p.fg_tie_break)


def upsample_mask(m: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Nearest-neighbor upsampling: output (y, x) copies input
    (floor(y*h/H), floor(x*w/W))."""
    m = np.asarray(m)
    h, w = m.shape
    if out_h < h or out_w < w:
        raise ShapeError(f"cannot downsample {h}x{w} mask to {out_h}x{out_w}")
    rows = (np.arange(out_h) * h) // out_h
    cols = (np.arange(out_w) * w) // out_w
    return m[np.ix_(rows, cols)].astype(np.uint8)
