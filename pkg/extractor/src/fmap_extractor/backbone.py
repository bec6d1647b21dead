"""Backbone abstraction: anything that maps an image batch to patch tokens.

A backbone is an object with a ``patch_size`` attribute, an ``embed_dim``
attribute, and a ``__call__`` taking a float tensor (b, 3, S, S) and
returning patch tokens (b, (S/patch)^2, embed_dim) in row-major patch
order.  The default implementation wraps a pretrained self-supervised
vision transformer; tests inject lightweight stand-ins.
"""

from __future__ import annotations

import numpy as np
import torch

# channel statistics the pretrained backbone was trained with
IMAGE_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
IMAGE_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)

DEFAULT_MODEL = "facebook/dinov2-large"


class PretrainedBackbone:
    """Pretrained ViT loaded from the model hub; class token discarded."""

    def __init__(self, model_name: str = DEFAULT_MODEL):
        try:
            from transformers import AutoModel
            self.model = AutoModel.from_pretrained(model_name)
        except Exception as e:
            raise RuntimeError(f"failed to load backbone {model_name!r}: {e}") from e
        self.model.eval()
        self.patch_size = int(self.model.config.patch_size)
        self.embed_dim = int(self.model.config.hidden_size)

    @torch.no_grad()
    def __call__(self, batch: torch.Tensor) -> torch.Tensor:
        out = self.model(pixel_values=batch)
        # drop the class token; the rest are patch tokens in row-major order
        return out.last_hidden_state[:, 1:]
