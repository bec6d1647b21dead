"""Synthetic camouflage dataset generator and comparison harness.

Feature-space model of camouflage: two dataset-level anchor directions
(object and environment) with low mutual cosine, and per-image texture
directions orthogonal to both.  The object shares its texture with a
surrounding halo of background cells, while background far from the
object carries a second texture.  Within one image the dominant
two-cluster structure is therefore object+halo vs far background, which
defeats intra-image clustering, while the anchor components keep object
and environment separable at the dataset level.

Optional per-cell artifacts are keyed to the absolute grid position of
the frame they appear in, so a different set of cells is corrupted in
each view; this is the failure mode multi-view fusion targets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coarse_mask import CoarseMaskParams, coarse_mask
from .errors import DegenerateMaskError
from .metrics import iou
from .mining import build_libraries, mine_image
from .retrieval import (
    RetrievalParams,
    View,
    build_index,
    fuse_votes,
    inverse,
    label_grid,
    transform_grid,
    transform_mask,
)
from .tensor_store import FeatureMap, write_fmap, write_manifest, write_mask

CENTERED_RECT = "centered_rect"
RANDOM_BLOB = "random_blob"

HALO_RADIUS = 3  # Chebyshev distance within which background shares the object texture
MIN_FG_FRAC = 0.10
MAX_FG_FRAC = 0.40


@dataclass(frozen=True)
class SynthSpec:
    num_images: int
    h: int
    w: int
    d: int
    intra_sim: float
    dataset_sep: float
    noise_sigma: float = 0.0
    fg_shape: str = CENTERED_RECT
    artifact_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.num_images < 1 or self.h < 4 or self.w < 4:
            raise ValueError("need num_images >= 1 and a grid of at least 4x4")
        if self.d < 4:
            raise ValueError("need d >= 4 for two texture directions orthogonal to the anchors")
        if not 0.0 <= self.intra_sim < 1.0 or not 0.0 <= self.dataset_sep <= 1.0:
            raise ValueError("intra_sim must be in [0, 1), dataset_sep in [0, 1]")
        if self.intra_sim <= self.dataset_sep:
            raise ValueError("camouflage regime requires intra_sim > dataset_sep")
        if not 0.0 <= self.artifact_rate < 1.0 or self.noise_sigma < 0.0:
            raise ValueError("artifact_rate must be in [0, 1), noise_sigma >= 0")
        if self.fg_shape not in (CENTERED_RECT, RANDOM_BLOB):
            raise ValueError(f"unknown fg_shape {self.fg_shape!r}")


@dataclass(frozen=True)
class SynthImage:
    image_id: str
    index: int
    clean: np.ndarray  # (h, w, d) float64, before artifact injection
    gt: np.ndarray  # (h, w) uint8


@dataclass(frozen=True)
class CompareReport:
    baseline_mean_iou: float
    retrieval_mean_iou: float
    baseline_per_image: dict[str, float] = field(default_factory=dict)
    retrieval_per_image: dict[str, float] = field(default_factory=dict)
    kept_images: int = 0
    threshold: float = float("nan")

    @property
    def gap(self) -> float:
        return self.retrieval_mean_iou - self.baseline_mean_iou


def _unit_orthogonal(rng, exclude, d):
    # orthonormalize first: the exclusion set need not be orthogonal itself
    basis = []
    for e in exclude:
        e = np.asarray(e, dtype=np.float64).copy()
        for b in basis:
            e -= (e @ b) * b
        norm = np.linalg.norm(e)
        if norm > 1e-10:
            basis.append(e / norm)
    for _ in range(100):
        v = rng.standard_normal(d)
        for b in basis:
            v -= (v @ b) * b
        norm = np.linalg.norm(v)
        if norm > 1e-8:
            return v / norm
    raise RuntimeError("could not sample an orthogonal unit vector")


def anchors(spec: SynthSpec) -> tuple[np.ndarray, np.ndarray]:
    """Dataset-level object/environment anchor directions with cosine
    equal to dataset_sep."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0xA0C0]))
    u = rng.standard_normal(spec.d)
    u /= np.linalg.norm(u)
    b = _unit_orthogonal(rng, [u], spec.d)
    u_f = u
    u_b = spec.dataset_sep * u + np.sqrt(1.0 - spec.dataset_sep**2) * b
    return u_f, u_b


def _gt_mask(spec: SynthSpec, rng) -> np.ndarray:
    h, w = spec.h, spec.w
    if spec.fg_shape == CENTERED_RECT:
        frac = rng.uniform(MIN_FG_FRAC, MAX_FG_FRAC)
        rh = int(np.clip(round(h * np.sqrt(frac)), 1, h - 2))
        rw = int(np.clip(round(w * np.sqrt(frac)), 1, w - 2))
        top = (h - rh) // 2
        left = (w - rw) // 2
        mask = np.zeros((h, w), dtype=np.uint8)
        mask[top:top + rh, left:left + rw] = 1
        return mask
    ys, xs = np.mgrid[0:h, 0:w]
    for _ in range(64):
        cy = rng.uniform(0.2 * h, 0.8 * h)
        cx = rng.uniform(0.2 * w, 0.8 * w)
        ry = rng.uniform(0.15 * h, 0.45 * h)
        rx = rng.uniform(0.15 * w, 0.45 * w)
        mask = ((((ys - cy) / ry) ** 2 + ((xs - cx) / rx) ** 2) <= 1.0).astype(np.uint8)
        frac = mask.mean()
        if MIN_FG_FRAC <= frac <= MAX_FG_FRAC:
            return mask
    # fall back to a centered rectangle if no ellipse lands in range
    return _gt_mask(
        SynthSpec(**{**spec.__dict__, "fg_shape": CENTERED_RECT}), rng
    )


def _dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    out = mask.astype(bool).copy()
    acc = mask.astype(bool)
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            if dy == 0 and dx == 0:
                continue
            shifted = np.zeros_like(acc)
            ys = slice(max(dy, 0), mask.shape[0] + min(dy, 0))
            yt = slice(max(-dy, 0), mask.shape[0] + min(-dy, 0))
            xs = slice(max(dx, 0), mask.shape[1] + min(dx, 0))
            xt = slice(max(-dx, 0), mask.shape[1] + min(-dx, 0))
            shifted[yt, xt] = acc[ys, xs]
            out |= shifted
    return out


def generate_images(spec: SynthSpec) -> list[SynthImage]:
    """Deterministic in-memory dataset: clean feature grids plus ground truth."""
    u_f, u_b = anchors(spec)
    plane = [u_f, u_b / np.linalg.norm(u_b)]
    a = np.sqrt(1.0 - spec.intra_sim**2)
    s = spec.intra_sim
    images = []
    for i in range(spec.num_images):
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 1, i]))
        gt = _gt_mask(spec, rng)
        tex_obj = _unit_orthogonal(rng, plane, spec.d)
        tex_far = _unit_orthogonal(rng, plane + [tex_obj], spec.d)
        # background within the halo shares the object texture; shrink the
        # halo if it would swallow the whole background
        radius = HALO_RADIUS
        while radius > 0:
            near = _dilate(gt, radius)
            if (~near).sum() > 0:
                break
            radius -= 1
        halo = near & (gt == 0)
        data = np.empty((spec.h, spec.w, spec.d), dtype=np.float64)
        data[gt == 1] = a * u_f + s * tex_obj
        data[halo] = a * u_b + s * tex_obj
        data[(gt == 0) & ~halo] = a * u_b + s * tex_far
        if spec.noise_sigma > 0:
            data += rng.normal(0.0, spec.noise_sigma, data.shape)
        images.append(
            SynthImage(image_id=f"synth_{i:04d}", index=i, clean=data, gt=gt)
        )
    return images


def apply_artifacts(data: np.ndarray, spec: SynthSpec, image_index: int) -> np.ndarray:
    """Replace cells with random unit directions, keyed to the absolute
    grid position of the frame the array is currently in."""
    if spec.artifact_rate == 0.0:
        return data
    out = data.copy()
    rows, cols = data.shape[:2]
    for i in range(rows):
        for j in range(cols):
            rng = np.random.default_rng(
                np.random.SeedSequence([spec.seed, 2, image_index, i, j])
            )
            if rng.random() < spec.artifact_rate:
                v = rng.standard_normal(spec.d)
                out[i, j] = v / np.linalg.norm(v)
    return out


def viewed_features(spec: SynthSpec, img: SynthImage, view: View) -> np.ndarray:
    """The feature grid as extracted in the given view's frame: spatial
    transform of the clean features plus frame-position-keyed artifacts."""
    return apply_artifacts(transform_grid(img.clean, view), spec, img.index)


def identity_feature_map(spec: SynthSpec, img: SynthImage) -> FeatureMap:
    data = viewed_features(spec, img, View.IDENTITY).astype(np.float32)
    return FeatureMap(image_id=img.image_id, data=data, orig_h=spec.h, orig_w=spec.w)


def write_dataset(spec: SynthSpec, out_dir) -> Path:
    """Write .fmap files, ground-truth PGMs, and a manifest; returns the
    manifest path."""
    out_dir = Path(out_dir)
    fmap_dir = out_dir / "fmaps"
    gt_dir = out_dir / "gt"
    fmap_dir.mkdir(parents=True, exist_ok=True)
    gt_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for img in generate_images(spec):
        fmap_path = fmap_dir / f"{img.image_id}.fmap"
        gt_path = gt_dir / f"{img.image_id}.pgm"
        write_fmap(fmap_path, identity_feature_map(spec, img))
        write_mask(gt_path, img.gt)
        entries.append((img.image_id, str(fmap_path), str(gt_path)))
    manifest_path = out_dir / "manifest.tsv"
    write_manifest(manifest_path, entries)
    return manifest_path


def multi_view_mask(spec: SynthSpec, img: SynthImage, index, params: RetrievalParams) -> np.ndarray:
    """Majority-fused mask with per-view feature extraction (artifacts land
    at frame positions, so each view corrupts different cells)."""
    total = np.zeros((spec.h, spec.w), dtype=np.int64)
    for view in params.views:
        feats = viewed_features(spec, img, view)
        labels = label_grid(feats, index, params)
        total += transform_mask(labels, inverse(view))
    return fuse_votes(total, len(params.views), params.fg_tie_break)


def compare(spec: SynthSpec, coarse_params: CoarseMaskParams,
            retrieval_params: RetrievalParams, bins: int = 50,
            out_dir=None) -> CompareReport:
    """Head-to-head: per-image coarse clustering alone vs the full
    mine -> filter -> index -> multi-view retrieval pipeline."""
    images = generate_images(spec)
    coarse = {}
    records = []
    skipped = []
    for img in images:
        fm = identity_feature_map(spec, img)
        mask = coarse_mask(fm, coarse_params)
        coarse[img.image_id] = mask
        try:
            records.append(mine_image(fm, coarse_params, mask=mask))
        except DegenerateMaskError:
            skipped.append(img.image_id)
    fg_lib, bg_lib, report = build_libraries(records, bins, skipped=skipped)
    index = build_index(fg_lib, bg_lib)
    baseline = {img.image_id: iou(coarse[img.image_id], img.gt) for img in images}
    retrieved_masks = {
        img.image_id: multi_view_mask(spec, img, index, retrieval_params) for img in images
    }
    retrieved = {iid: iou(m, images[i].gt) for i, (iid, m) in enumerate(retrieved_masks.items())}
    if out_dir is not None:
        out_dir = Path(out_dir)
        for sub in ("coarse", "masks", "gt"):
            (out_dir / sub).mkdir(parents=True, exist_ok=True)
        for img in images:
            write_mask(out_dir / "coarse" / f"{img.image_id}.pgm", coarse[img.image_id])
            write_mask(out_dir / "masks" / f"{img.image_id}.pgm", retrieved_masks[img.image_id])
            write_mask(out_dir / "gt" / f"{img.image_id}.pgm", img.gt)
    return CompareReport(
        baseline_mean_iou=float(np.mean(list(baseline.values()))),
        retrieval_mean_iou=float(np.mean(list(retrieved.values()))),
        baseline_per_image=baseline,
        retrieval_per_image=retrieved,
        kept_images=report.kept_images,
        threshold=report.threshold,
    )
