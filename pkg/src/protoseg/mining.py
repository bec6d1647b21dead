"""Prototype mining over the dataset.

Per image: mask-averaged global features, category feature sets, and
cross-category prototype selection (the foreground prototype is the
foreground feature least similar to the global background feature, and
symmetrically).  Dataset level: histogram-based filtering of images whose
foreground/background global features are too similar, then library
assembly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coarse_mask import CoarseMaskParams, coarse_mask
from .errors import DegenerateMaskError, DegenerateVectorError, EmptyLibraryError
from .numerics import cosine, histogram_peak
from .tensor_store import BACKGROUND, FOREGROUND, FeatureMap, PrototypeLibrary


@dataclass(frozen=True)
class ImageProtoRecord:
    image_id: str
    fg_global: np.ndarray
    bg_global: np.ndarray
    fg_proto: np.ndarray
    bg_proto: np.ndarray
    global_sim: float


@dataclass(frozen=True)
class LibraryBuildReport:
    total_images: int
    kept_images: int
    threshold: float
    kept_ids: tuple[str, ...]
    skipped_degenerate: tuple[str, ...] = field(default_factory=tuple)


def global_features(fm: FeatureMap, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel means of the features under the mask and its complement."""
    mask = np.asarray(mask)
    if mask.shape != (fm.h, fm.w):
        raise ValueError(
            f"{fm.image_id}: mask shape {mask.shape} != grid shape {(fm.h, fm.w)}"
        )
    fg = mask == 1
    n_fg = int(fg.sum())
    n_bg = fg.size - n_fg
    if n_fg == 0 or n_bg == 0:
        raise DegenerateMaskError(
            f"{fm.image_id}: mask has {n_fg} foreground and {n_bg} background cells"
        )
    data = fm.data.astype(np.float64)
    fg_global = data[fg].mean(axis=0)
    bg_global = data[~fg].mean(axis=0)
    return fg_global, bg_global


def split_sets(fm: FeatureMap, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Feature vectors under the mask and its complement, row-major order."""
    mask = np.asarray(mask)
    if mask.shape != (fm.h, fm.w):
        raise ValueError(
            f"{fm.image_id}: mask shape {mask.shape} != grid shape {(fm.h, fm.w)}"
        )
    flat = fm.data.reshape(-1, fm.d)
    sel = (mask == 1).ravel()
    if not sel.any() or sel.all():
        raise DegenerateMaskError(f"{fm.image_id}: mask selects an empty category")
    return flat[sel], flat[~sel]


def _least_similar(candidates: np.ndarray, reference: np.ndarray) -> np.ndarray:
    ref_norm = np.linalg.norm(reference)
    if ref_norm == 0.0:
        raise DegenerateVectorError("zero-norm global feature")
    cands = np.asarray(candidates, dtype=np.float64)
    norms = np.linalg.norm(cands, axis=1)
    valid = norms > 0.0
    if not valid.any():
        raise DegenerateVectorError("all candidate features have zero norm")
    sims = np.full(len(cands), np.inf)
    sims[valid] = (cands[valid] @ reference) / (norms[valid] * ref_norm)
    return candidates[int(np.argmin(sims))]  # argmin takes the lowest index on ties


def cross_category_prototypes(s_f, s_b, fg_global, bg_global):
    """Foreground prototype = fg feature least similar to the global
    background feature; background prototype symmetrically."""
    p_f = _least_similar(np.asarray(s_f), np.asarray(bg_global, dtype=np.float64))
    p_b = _least_similar(np.asarray(s_b), np.asarray(fg_global, dtype=np.float64))
    return p_f, p_b


def mine_image(fm: FeatureMap, p: CoarseMaskParams, mask: np.ndarray | None = None) -> ImageProtoRecord:
    """Coarse mask -> pooling -> cross-category prototypes for one image.

    A precomputed coarse mask may be passed to avoid re-clustering.
    Raises DegenerateMaskError when clustering collapses to one category.
    """
    if mask is None:
        mask = coarse_mask(fm, p)
    fg_global, bg_global = global_features(fm, mask)
    s_f, s_b = split_sets(fm, mask)
    p_f, p_b = cross_category_prototypes(s_f, s_b, fg_global, bg_global)
    return ImageProtoRecord(
        image_id=fm.image_id,
        fg_global=fg_global,
        bg_global=bg_global,
        fg_proto=np.array(p_f, dtype=np.float32),
        bg_proto=np.array(p_b, dtype=np.float32),
        global_sim=cosine(fg_global, bg_global),
    )


def build_libraries(records, bins: int, skipped=()):
    """Filter records below the histogram-peak similarity threshold and
    assemble the two index-aligned prototype libraries.

    Returns (fg_lib, bg_lib, report).
    """
    records = list(records)
    if not records:
        raise EmptyLibraryError("no non-degenerate records to build libraries from")
    sims = [r.global_sim for r in records]
    threshold = histogram_peak(sims, bins)
    kept = [r for r in records if r.global_sim < threshold]
    if not kept:
        raise EmptyLibraryError(
            f"no image has global similarity strictly below the threshold {threshold:.6f}"
        )
    kept_ids = tuple(r.image_id for r in kept)
    fg_lib = PrototypeLibrary(
        category=FOREGROUND,
        prototypes=np.stack([r.fg_proto for r in kept]),
        source_ids=kept_ids,
    )
    bg_lib = PrototypeLibrary(
        category=BACKGROUND,
        prototypes=np.stack([r.bg_proto for r in kept]),
        source_ids=kept_ids,
    )
    report = LibraryBuildReport(
        total_images=len(records) + len(tuple(skipped)),
        kept_images=len(kept),
        threshold=threshold,
        kept_ids=kept_ids,
        skipped_degenerate=tuple(skipped),
    )
    return fg_lib, bg_lib, report


def format_build_report(report: LibraryBuildReport, records) -> str:
    """Line-oriented report: a threshold header then one
    ``id<TAB>sim<TAB>kept|skipped`` row per image."""
    kept = set(report.kept_ids)
    lines = [f"threshold\t{report.threshold:.8f}\tkept {report.kept_images}/{report.total_images}"]
    for r in records:
        status = "kept" if r.image_id in kept else "skipped"
        lines.append(f"{r.image_id}\t{r.global_sim:.8f}\t{status}")
    for image_id in report.skipped_degenerate:
        lines.append(f"{image_id}\tnan\tskipped")
    return "\n".join(lines) + "\n"
