"""Mask-quality metrics and dataset-level aggregation."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ShapeError
from .tensor_store import read_mask

DEFAULT_BETA_SQ = 0.3


def _check_pair(pred, gt):
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ShapeError(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    return pred.astype(np.float64), gt.astype(np.float64)


def mae(pred, gt) -> float:
    p, g = _check_pair(pred, gt)
    return float(np.abs(p - g).mean())


def iou(pred, gt) -> float:
    p, g = _check_pair(pred, gt)
    inter = float(((p == 1) & (g == 1)).sum())
    union = float(((p == 1) | (g == 1)).sum())
    if union == 0.0:
        return 1.0  # both empty: perfect agreement by convention
    return inter / union


def f_measure(pred, gt, beta_sq: float = DEFAULT_BETA_SQ) -> float:
    p, g = _check_pair(pred, gt)
    tp = float(((p == 1) & (g == 1)).sum())
    pred_pos = float((p == 1).sum())
    gt_pos = float((g == 1).sum())
    if gt_pos == 0.0 and pred_pos == 0.0:
        return 1.0
    if pred_pos == 0.0 or gt_pos == 0.0:
        return 0.0
    precision = tp / pred_pos
    recall = tp / gt_pos
    if precision == 0.0 and recall == 0.0:
        return 0.0
    return (1.0 + beta_sq) * precision * recall / (beta_sq * precision + recall)


@dataclass(frozen=True)
class EvalReport:
    per_image: dict[str, dict[str, float]]
    mean_mae: float
    mean_iou: float
    mean_f: float


def evaluate_pairs(pairs) -> EvalReport:
    """Metrics for an ordered iterable of (image_id, pred_mask, gt_mask)."""
    per_image: dict[str, dict[str, float]] = {}
    for image_id, pred, gt in pairs:
        per_image[image_id] = {
            "mae": mae(pred, gt),
            "iou": iou(pred, gt),
            "f_measure": f_measure(pred, gt),
        }
    if not per_image:
        raise ValueError("no images to evaluate")
    rows = list(per_image.values())
    return EvalReport(
        per_image=per_image,
        mean_mae=float(np.mean([r["mae"] for r in rows])),
        mean_iou=float(np.mean([r["iou"] for r in rows])),
        mean_f=float(np.mean([r["f_measure"] for r in rows])),
    )


def evaluate_dataset(image_ids, pred_dir, gt_dir) -> EvalReport:
    """Per-image metrics plus means, iterating in the given id order.

    Expects ``<id>.pgm`` masks in both directories.
    """
    pred_dir = Path(pred_dir)
    gt_dir = Path(gt_dir)

    def pairs():
        for image_id in image_ids:
            pred_path = pred_dir / f"{image_id}.pgm"
            gt_path = gt_dir / f"{image_id}.pgm"
            for path in (pred_path, gt_path):
                if not path.exists():
                    raise FileNotFoundError(f"missing mask for image {image_id!r}: {path}")
            yield image_id, read_mask(pred_path), read_mask(gt_path)

    return evaluate_pairs(pairs())


def format_report(report: EvalReport) -> str:
    """Tab-separated: header, one row per image, final MEAN row."""
    lines = ["image_id\tmae\tiou\tf_measure"]
    for image_id, row in report.per_image.items():
        lines.append(
            f"{image_id}\t{row['mae']:.8f}\t{row['iou']:.8f}\t{row['f_measure']:.8f}"
        )
    lines.append(f"MEAN\t{report.mean_mae:.8f}\t{report.mean_iou:.8f}\t{report.mean_f:.8f}")
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> EvalReport:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].split("\t") != ["image_id", "mae", "iou", "f_measure"]:
        raise ValueError("not an evaluation report")
    per_image: dict[str, dict[str, float]] = {}
    means = None
    for line in lines[1:]:
        image_id, m, i, f = line.split("\t")
        if image_id == "MEAN":
            means = (float(m), float(i), float(f))
        else:
            per_image[image_id] = {"mae": float(m), "iou": float(i), "f_measure": float(f)}
    if means is None:
        raise ValueError("report is missing its MEAN row")
    return EvalReport(per_image=per_image, mean_mae=means[0], mean_iou=means[1], mean_f=means[2])
