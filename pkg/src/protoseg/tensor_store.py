"""Bit-exact serialization of feature maps, masks, and prototype libraries.

Binary layouts are little-endian throughout so files are byte-identical
across platforms.  Masks use binary (P5) PGM so they stay inspectable with
standard image viewers.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError

FMAP_MAGIC = b"FMAP"
PLIB_MAGIC = b"PLIB"
FORMAT_VERSION = 1

FOREGROUND = "foreground"
BACKGROUND = "background"
_CATEGORY_BYTE = {FOREGROUND: 0, BACKGROUND: 1}
_BYTE_CATEGORY = {0: FOREGROUND, 1: BACKGROUND}


@dataclass(frozen=True)
class FeatureMap:
    """h x w grid of d-dimensional float32 features for one image."""

    image_id: str
    data: np.ndarray  # (h, w, d) float32
    orig_h: int
    orig_w: int

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ValueError(f"feature map must be (h, w, d) with positive dims, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError(f"feature map {self.image_id!r} contains NaN or infinite values")
        if self.orig_h < 1 or self.orig_w < 1:
            raise ValueError("original resolution must be positive")
        object.__setattr__(self, "data", arr)

    @property
    def h(self) -> int:
        return self.data.shape[0]

    @property
    def w(self) -> int:
        return self.data.shape[1]

    @property
    def d(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class PrototypeLibrary:
    """Ordered prototypes for one category with their source image ids."""

    category: str  # FOREGROUND or BACKGROUND
    prototypes: np.ndarray  # (n, d) float32
    source_ids: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.category not in _CATEGORY_BYTE:
            raise ValueError(f"unknown category {self.category!r}")
        arr = np.asarray(self.prototypes, dtype=np.float32)
        if arr.ndim != 2:
            raise ValueError(f"prototypes must be (n, d), got shape {arr.shape}")
        ids = tuple(self.source_ids)
        if arr.shape[0] != len(ids):
            raise ValueError(f"{arr.shape[0]} prototypes but {len(ids)} source ids")
        if arr.shape[0] and not (np.linalg.norm(arr, axis=1) > 0).all():
            raise ValueError("every prototype must have nonzero norm")
        object.__setattr__(self, "prototypes", arr)
        object.__setattr__(self, "source_ids", ids)

    @property
    def n(self) -> int:
        return self.prototypes.shape[0]

    @property
    def d(self) -> int:
        return self.prototypes.shape[1]


def _as_mask(m) -> np.ndarray:
    arr = np.asarray(m)
    if arr.ndim != 2 or min(arr.shape) < 1:
        raise ValueError(f"mask must be 2-D with positive dims, got shape {arr.shape}")
    if not np.isin(arr, (0, 1)).all():
        raise ValueError("mask cells must all be 0 or 1")
    return arr.astype(np.uint8)


def write_fmap(path, fm: FeatureMap) -> None:
    path = Path(path)
    id_bytes = fm.image_id.encode("utf-8")
    header = FMAP_MAGIC + struct.pack(
        "<7I", FORMAT_VERSION, fm.h, fm.w, fm.d, fm.orig_h, fm.orig_w, len(id_bytes)
    )
    payload = np.ascontiguousarray(fm.data, dtype="<f4").tobytes()
    path.write_bytes(header + id_bytes + payload)


def read_fmap(path) -> FeatureMap:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != FMAP_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}")
    if len(raw) < 32:
        raise FormatError(f"{path}: truncated header")
    version, h, w, d, orig_h, orig_w, id_len = struct.unpack_from("<7I", raw, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    offset = 32 + id_len
    n_bytes = h * w * d * 4
    if len(raw) != offset + n_bytes:
        raise FormatError(
            f"{path}: expected {offset + n_bytes} bytes for {h}x{w}x{d} payload, got {len(raw)}"
        )
    image_id = raw[32:offset].decode("utf-8")
    data = np.frombuffer(raw, dtype="<f4", count=h * w * d, offset=offset).reshape(h, w, d)
    if not np.isfinite(data).all():
        raise FormatError(f"{path}: payload contains NaN or infinite values")
    return FeatureMap(image_id=image_id, data=data.copy(), orig_h=orig_h, orig_w=orig_w)


def write_mask(path, m) -> None:
    arr = _as_mask(m)
    rows, cols = arr.shape
    header = f"P5\n{cols} {rows}\n255\n".encode("ascii")
    Path(path).write_bytes(header + (arr * np.uint8(255)).tobytes())


def read_mask(path) -> np.ndarray:
    path = Path(path)
    raw = path.read_bytes()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+255\s", raw)
    if m is None:
        raise FormatError(f"{path}: not a binary PGM mask")
    cols, rows = int(m.group(1)), int(m.group(2))
    payload = raw[m.end():]
    if len(payload) != rows * cols:
        raise FormatError(f"{path}: expected {rows * cols} payload bytes, got {len(payload)}")
    data = np.frombuffer(payload, dtype=np.uint8).reshape(rows, cols)
    return (data >= 128).astype(np.uint8)


def write_plib(path, lib: PrototypeLibrary) -> None:
    parts = [
        PLIB_MAGIC,
        struct.pack("<I", FORMAT_VERSION),
        struct.pack("<B", _CATEGORY_BYTE[lib.category]),
        struct.pack("<II", lib.n, lib.d),
        np.ascontiguousarray(lib.prototypes, dtype="<f4").tobytes(),
    ]
    for sid in lib.source_ids:
        sid_bytes = sid.encode("utf-8")
        parts.append(struct.pack("<I", len(sid_bytes)))
        parts.append(sid_bytes)
    Path(path).write_bytes(b"".join(parts))


def read_plib(path) -> PrototypeLibrary:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != PLIB_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}")
    if len(raw) < 17:
        raise FormatError(f"{path}: truncated header")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    cat_byte = raw[8]
    if cat_byte not in _BYTE_CATEGORY:
        raise FormatError(f"{path}: unknown category byte {cat_byte}")
    n, d = struct.unpack_from("<II", raw, 9)
    offset = 17
    n_bytes = n * d * 4
    if len(raw) < offset + n_bytes:
        raise FormatError(f"{path}: truncated prototype payload")
    protos = np.frombuffer(raw, dtype="<f4", count=n * d, offset=offset).reshape(n, d)
    offset += n_bytes
    ids = []
    for _ in range(n):
        if len(raw) < offset + 4:
            raise FormatError(f"{path}: truncated source id table")
        (id_len,) = struct.unpack_from("<I", raw, offset)
        offset += 4
        if len(raw) < offset + id_len:
            raise FormatError(f"{path}: truncated source id")
        ids.append(raw[offset:offset + id_len].decode("utf-8"))
        offset += id_len
    if offset != len(raw):
        raise FormatError(f"{path}: {len(raw) - offset} trailing bytes")
    return PrototypeLibrary(
        category=_BYTE_CATEGORY[cat_byte], prototypes=protos.copy(), source_ids=tuple(ids)
    )


def write_manifest(path, entries) -> None:
    """Write one ``id<TAB>fmap_path<TAB>gt_path`` line per image.

    ``entries`` is a sequence of (image_id, fmap_path, gt_path) where
    gt_path may be None.
    """
    lines = []
    for image_id, fmap_path, gt_path in entries:
        gt = "" if gt_path is None else str(gt_path)
        lines.append(f"{image_id}\t{fmap_path}\t{gt}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path) -> list[tuple[str, str, str | None]]:
    entries = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) not in (2, 3):
            raise FormatError(f"{path}: bad manifest line {line!r}")
        image_id, fmap_path = parts[0], parts[1]
        gt_path = parts[2] if len(parts) == 3 and parts[2] else None
        entries.append((image_id, fmap_path, gt_path))
    return entries
