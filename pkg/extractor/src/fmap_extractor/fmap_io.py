"""Writer for the .fmap interchange format.

Layout: magic "FMAP", seven little-endian u32 fields (version, h, w, d,
orig_h, orig_w, id length), the UTF-8 image id, then h*w*d float32
values in row-major order.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"FMAP"
VERSION = 1


def write_fmap(path, image_id: str, data: np.ndarray, orig_h: int, orig_w: int) -> None:
    data = np.ascontiguousarray(data, dtype=np.float32)
    if data.ndim != 3:
        raise ValueError(f"feature grid must be h x w x d, got shape {data.shape}")
    if not np.isfinite(data).all():
        raise ValueError(f"{image_id}: feature grid contains non-finite values")
    if orig_h < 1 or orig_w < 1:
        raise ValueError(f"{image_id}: original resolution must be positive")
    h, w, d = data.shape
    id_bytes = image_id.encode("utf-8")
    with open(Path(path), "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<7I", VERSION, h, w, d, orig_h, orig_w, len(id_bytes)))
        fh.write(id_bytes)
        fh.write(data.tobytes())
