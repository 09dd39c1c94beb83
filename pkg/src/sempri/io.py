"""Readers and writers for images, masks, score tensors, saliency maps and manifests.

Images are returned as ``uint8`` arrays of shape ``(h, w, 3)``, masks as
``uint8`` arrays of zeros and ones, score tensors as ``float64`` arrays of
shape ``(h, w, n_c)`` whose pixels lie on the probability simplex.

SPST tensor layout (little-endian)::

    b"SPST" | u32 version=1 | u32 h | u32 w | u32 n_c | f32[h*w*n_c] (y, x, c order)
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass, field
from io import BytesIO
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .exceptions import CorruptFileError, DataError, UnsupportedFormatError

SPST_MAGIC = b"SPST"
SPST_VERSION = 1
_SPST_HEADER = struct.Struct("<4sIIII")
# refuse tensors above 2**31 floats rather than attempt the allocation
_SPST_MAX_VALUES = 2**31
SIMPLEX_TOL = 1e-5

MASK_THRESHOLD = 127


def _open_raster(path) -> Image.Image:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        img = Image.open(path)
        img.load()
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise CorruptFileError(f"cannot decode raster {path}: {exc}") from exc
    return img


def load_image(path) -> np.ndarray:
    """Read an 8-bit RGB PNG/PPM into an ``(h, w, 3)`` uint8 array.

    Grayscale and palette images are expanded to three channels; an alpha
    channel is dropped. Pixel values are never color-converted.
    """
    img = _open_raster(path)
    if img.mode == "RGB":
        pass
    elif img.mode in ("L", "P", "RGBA", "LA", "1"):
        img = img.convert("RGB")
    else:
        raise UnsupportedFormatError(f"{path}: unsupported raster mode {img.mode!r}")
    return np.asarray(img, dtype=np.uint8).copy()


def load_mask(path, h: int | None = None, w: int | None = None) -> np.ndarray:
    """Read a ground-truth mask and binarize it: ``pixel > 127`` maps to 1."""
    img = _open_raster(path)
    if img.mode in ("RGB", "RGBA", "P", "LA", "1"):
        img = img.convert("L")
    elif img.mode != "L":
        raise UnsupportedFormatError(f"{path}: unsupported mask mode {img.mode!r}")
    arr = np.asarray(img, dtype=np.uint8)
    if h is not None and w is not None and arr.shape != (h, w):
        raise DataError(f"{path}: mask is {arr.shape[0]}x{arr.shape[1]}, expected {h}x{w}")
    return (arr > MASK_THRESHOLD).astype(np.uint8)


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    z = x - np.max(x, axis=axis, keepdims=True)
    np.exp(z, out=z)
    z /= np.sum(z, axis=axis, keepdims=True)
    return z


def is_simplex(scores: np.ndarray, tol: float = SIMPLEX_TOL) -> bool:
    """True when every pixel's scores are non-negative and sum to 1 within ``tol``."""
    if np.any(scores < 0):
        return False
    return bool(np.all(np.abs(scores.sum(axis=-1) - 1.0) <= tol))


def normalize_scores(scores: np.ndarray) -> np.ndarray:
    """Return ``scores`` as float64, applying a per-pixel softmax unless already normalized."""
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise DataError("score tensor contains non-finite values")
    if is_simplex(scores):
        return scores
    return softmax(scores.copy(), axis=-1)


def load_score_tensor(path) -> np.ndarray:
    """Read an SPST file into a normalized ``(h, w, n_c)`` float64 array."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    data = path.read_bytes()
    if len(data) < _SPST_HEADER.size:
        raise CorruptFileError(f"{path}: truncated SPST header")
    magic, version, h, w, n_c = _SPST_HEADER.unpack_from(data)
    if magic != SPST_MAGIC:
        raise CorruptFileError(f"{path}: bad magic {magic!r}")
    if version != SPST_VERSION:
        raise CorruptFileError(f"{path}: unsupported SPST version {version}")
    if h < 1 or w < 1 or n_c < 1:
        raise CorruptFileError(f"{path}: empty dimensions {h}x{w}x{n_c}")
    count = h * w * n_c
    if count > _SPST_MAX_VALUES:
        raise CorruptFileError(f"{path}: dimension overflow {h}x{w}x{n_c}")
    payload = len(data) - _SPST_HEADER.size
    if payload != 4 * count:
        raise CorruptFileError(f"{path}: payload has {payload} bytes, expected {4 * count} for {h}x{w}x{n_c}")
    values = np.frombuffer(data, dtype="<f4", count=count, offset=_SPST_HEADER.size)
    return normalize_scores(values.reshape(h, w, n_c))


def atomic_write_bytes(path, payload: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_score_tensor(scores: np.ndarray, path) -> None:
    scores = np.asarray(scores)
    if scores.ndim != 3:
        raise DataError(f"score tensor must be 3-D, got shape {scores.shape}")
    h, w, n_c = scores.shape
    header = _SPST_HEADER.pack(SPST_MAGIC, SPST_VERSION, h, w, n_c)
    atomic_write_bytes(path, header + np.ascontiguousarray(scores, dtype="<f4").tobytes())


def _png_bytes(arr: np.ndarray) -> bytes:
    buf = BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def saliency_to_uint8(saliency: np.ndarray) -> np.ndarray:
    """Quantize a [0, 1] map as ``round(255 * S)`` with halves rounded up."""
    s = np.asarray(saliency, dtype=np.float64)
    if s.size and (np.nanmin(s) < 0.0 or np.nanmax(s) > 1.0 or not np.all(np.isfinite(s))):
        raise DataError("saliency values must lie in [0, 1]")
    return np.floor(255.0 * s + 0.5).astype(np.uint8)


def write_saliency_map(saliency: np.ndarray, path) -> None:
    """Write a saliency map as an 8-bit grayscale PNG (atomic replace)."""
    atomic_write_bytes(path, _png_bytes(saliency_to_uint8(saliency)))


def load_saliency_map(path) -> np.ndarray:
    img = _open_raster(path)
    if img.mode != "L":
        img = img.convert("L")
    return np.asarray(img, dtype=np.float64) / 255.0


def write_image(image: np.ndarray, path) -> None:
    atomic_write_bytes(path, _png_bytes(np.asarray(image, dtype=np.uint8)))


def write_mask(mask: np.ndarray, path) -> None:
    atomic_write_bytes(path, _png_bytes((np.asarray(mask) > 0).astype(np.uint8) * 255))


def write_label_png(labels: np.ndarray, path) -> None:
    """Write a superpixel label map as a 16-bit grayscale PNG."""
    labels = np.asarray(labels)
    if labels.max(initial=0) > 0xFFFF:
        raise DataError("label map has more than 65536 regions")
    img = Image.fromarray(labels.astype(np.uint16))
    buf = BytesIO()
    img.save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


@dataclass(frozen=True)
class ManifestEntry:
    image: Path
    mask: Path | None
    tensor: Path

    @property
    def stem(self) -> str:
        return self.image.stem


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...] = field(default_factory=tuple)
    split: str = "test"

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def n_train(self) -> int:
        return len(self.entries) if self.split == "train" else 0


SPLITS = ("train", "test")


def parse_manifest(path, split: str | None = None) -> DatasetManifest:
    """Parse a tab-separated manifest: ``<image>\\t<mask|->\\t<tensor>`` per line.

    Relative paths resolve against the manifest's directory. Blank lines and
    ``#`` comments are skipped; a ``# split: train`` comment sets the split
    unless ``split`` is passed explicitly. Train entries must carry masks.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such manifest: {path}")
    base = path.parent
    declared = None
    entries = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.lower().startswith("split:"):
                declared = body.split(":", 1)[1].strip()
            continue
        parts = raw.rstrip("\r\n").split("\t")
        if len(parts) != 3:
            raise DataError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}")
        image, mask, tensor = (p.strip() for p in parts)
        entry = ManifestEntry(
            image=_resolve(base, image, path, lineno),
            mask=None if mask == "-" else _resolve(base, mask, path, lineno),
            tensor=_resolve(base, tensor, path, lineno),
        )
        entries.append((lineno, entry))

    split = split or declared or "test"
    if split not in SPLITS:
        raise DataError(f"{path}: unknown split {split!r}")
    if split == "train":
        for lineno, entry in entries:
            if entry.mask is None:
                raise DataError(f"{path}:{lineno}: train entry {entry.image.name} has no mask")
    return DatasetManifest(tuple(e for _, e in entries), split)


def _resolve(base: Path, item: str, manifest: Path, lineno: int) -> Path:
    p = Path(item)
    if not p.is_absolute():
        p = base / p
    if not p.exists():
        raise DataError(f"{manifest}:{lineno}: unresolvable path {item}")
    return p


def write_manifest(manifest: DatasetManifest, path) -> None:
    path = Path(path)
    base = path.parent.resolve()

    def rel(p):
        p = Path(p).resolve()
        try:
            return str(p.relative_to(base))
        except ValueError:
            return str(p)

    lines = [f"# split: {manifest.split}"]
    for e in manifest.entries:
        mask = rel(e.mask) if e.mask is not None else "-"
        lines.append(f"{rel(e.image)}\t{mask}\t{rel(e.tensor)}")
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))


def load_entry(entry: ManifestEntry, n_classes: int | None = None, *, need_mask: bool = False):
    """Load ``(image, scores, mask)`` for one manifest entry, checking they agree.

    Any failure is re-raised as a :class:`DataError` naming the entry.
    """
    try:
        image = load_image(entry.image)
        scores = load_score_tensor(entry.tensor)
        if scores.shape[:2] != image.shape[:2]:
            raise DataError(
                f"tensor is {scores.shape[0]}x{scores.shape[1]}, image is {image.shape[0]}x{image.shape[1]}"
            )
        if n_classes is not None and scores.shape[2] != n_classes:
            raise DataError(f"tensor has {scores.shape[2]} classes, expected {n_classes}")
        if entry.mask is None:
            if need_mask:
                raise DataError("entry has no mask")
            mask = None
        else:
            mask = load_mask(entry.mask, *image.shape[:2])
    except (DataError, OSError) as exc:
        raise DataError(f"entry {entry.image.name}: {exc}") from exc
    return image, scores, mask
