"""Image-to-feature-map extraction."""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

from .backbone import DEFAULT_MODEL, IMAGE_MEAN, IMAGE_STD, PretrainedBackbone
from .fmap_io import write_fmap

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".webp")


@dataclass(frozen=True)
class ExtractConfig:
    image_dir: Path
    out_dir: Path
    model_name: str = DEFAULT_MODEL
    image_size: int = 476
    layer: str = "last"

    def __post_init__(self):
        if self.image_size < 1:
            raise ValueError("image_size must be positive")
        if self.layer != "last":
            raise ValueError(f"unsupported layer {self.layer!r}: only 'last' is implemented")


def preprocess(img: Image.Image, size: int) -> torch.Tensor:
    """Resize to size x size and normalize; returns (3, size, size)."""
    arr = np.asarray(
        img.convert("RGB").resize((size, size), Image.BILINEAR), dtype=np.float32
    ) / 255.0
    arr = (arr - IMAGE_MEAN) / IMAGE_STD
    return torch.from_numpy(arr.transpose(2, 0, 1))


def tokens_to_grid(tokens: torch.Tensor, grid: int) -> np.ndarray:
    """Reshape (n_patches, d) row-major patch tokens to (grid, grid, d)."""
    n, d = tokens.shape
    if n != grid * grid:
        raise ValueError(f"expected {grid * grid} patch tokens, got {n}")
    return tokens.detach().cpu().numpy().reshape(grid, grid, d)


def image_paths(image_dir: Path) -> list[Path]:
    return sorted(
        p for p in Path(image_dir).iterdir()
        if p.suffix.lower() in IMAGE_SUFFIXES
    )


def extract(config: ExtractConfig, backbone=None) -> int:
    """Write one .fmap per decodable image; returns the number written.

    Undecodable images are skipped with a warning; a backbone load
    failure is fatal.
    """
    if backbone is None:
        backbone = PretrainedBackbone(config.model_name)
    if config.image_size % backbone.patch_size != 0:
        raise ValueError(
            f"image_size {config.image_size} not divisible by "
            f"patch size {backbone.patch_size}"
        )
    grid = config.image_size // backbone.patch_size
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = 0
    for path in image_paths(config.image_dir):
        try:
            with Image.open(path) as img:
                orig_w, orig_h = img.size
                batch = preprocess(img, config.image_size)[None]
        except (UnidentifiedImageError, OSError) as e:
            print(f"warning: skipping {path.name}: {e}", file=sys.stderr)
            continue
        tokens = backbone(batch)[0]
        data = tokens_to_grid(tokens, grid)
        write_fmap(out_dir / f"{path.stem}.fmap", path.stem, data, orig_h, orig_w)
        written += 1
    return written
