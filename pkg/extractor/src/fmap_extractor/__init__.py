"""Dense patch-feature extraction from images into .fmap files."""

from .backbone import DEFAULT_MODEL, PretrainedBackbone
from .extract import ExtractConfig, extract, image_paths, preprocess, tokens_to_grid
from .fmap_io import write_fmap

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_MODEL",
    "ExtractConfig",
    "PretrainedBackbone",
    "extract",
    "image_paths",
    "preprocess",
    "tokens_to_grid",
    "write_fmap",
]
