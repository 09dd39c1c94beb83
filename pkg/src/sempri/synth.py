"""Seeded synthetic scenes with planted semantic saliency.

Each scene is a textured background (class 0) with 2-4 textured ellipses or
rectangles, each carrying an object class drawn from a small palette spread
over ``1..n_classes-1``; hue is tied to the class. The planted preference rule: the highest class index
present in the final layout is salient, every other object is not. Score
tensors are near one-hot (0.9 on the true class, the remainder spread evenly).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from skimage.color import hsv2rgb

from .exceptions import DataError
from .io import DatasetManifest, ManifestEntry, write_image, write_manifest, write_mask, write_score_tensor
from .semantics import N_CLASSES

DEFAULT_SHAPE = (150, 200)
TRUE_CLASS_WEIGHT = 0.9
DEFAULT_PALETTE = 4
DEFAULT_SCALE = (0.2, 0.35)  # shape semi-axes as a fraction of min(h, w)


@dataclass(frozen=True, eq=False)
class Scene:
    image: np.ndarray  # (h, w, 3) uint8
    layout: np.ndarray  # (h, w) class index per pixel
    mask: np.ndarray  # (h, w) 0/1
    scores: np.ndarray  # (h, w, n_c) float32
    salient_class: int


def preferred_class(classes) -> int:
    """The planted preference: larger class index wins."""
    return max(classes)


def near_one_hot(layout: np.ndarray, n_classes: int, weight: float = TRUE_CLASS_WEIGHT) -> np.ndarray:
    rest = (1.0 - weight) / (n_classes - 1)
    scores = np.full(layout.shape + (n_classes,), rest, dtype=np.float32)
    np.put_along_axis(scores, layout[..., None].astype(np.int64), np.float32(weight), axis=2)
    return scores


def _texture(rng, h, w, amplitude):
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    kind = rng.integers(3)
    if kind == 0:  # stripes
        theta = rng.uniform(0, np.pi)
        period = rng.uniform(4, 12)
        t = np.sin(2 * np.pi * (xx * np.cos(theta) + yy * np.sin(theta)) / period)
    elif kind == 1:  # checker
        cell = int(rng.integers(3, 8))
        t = ((yy // cell + xx // cell) % 2) * 2.0 - 1.0
    else:  # grain
        t = rng.uniform(-1, 1, (h, w))
    return amplitude * t


def _shape_mask(rng, h, w, scale):
    yy, xx = np.mgrid[0:h, 0:w]
    s = min(h, w)
    ry, rx = rng.uniform(*scale, 2) * s
    cy, cx = rng.uniform(0.2, 0.8) * h, rng.uniform(0.2, 0.8) * w
    if rng.random() < 0.5:
        return ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
    return (np.abs(yy - cy) <= ry) & (np.abs(xx - cx) <= rx)


def _class_color(rng, slot, n_slots):
    hue = (slot / n_slots + rng.uniform(-0.015, 0.015)) % 1.0
    sat = rng.uniform(0.6, 0.9)
    val = rng.uniform(0.65, 0.95)
    return hsv2rgb(np.array([[[hue, sat, val]]]))[0, 0] * 255.0


def default_palette(n_classes: int, size: int = DEFAULT_PALETTE) -> tuple[int, ...]:
    """Object classes used by the generator: ``size`` classes spread over ``1..n_classes-1``."""
    n_obj = n_classes - 1
    size = min(size, n_obj)
    return tuple(int(v) for v in np.unique(np.round(np.linspace(1, n_obj, size)).astype(int)))


def make_scene(
    rng: np.random.Generator, n_classes: int = N_CLASSES, shape=DEFAULT_SHAPE, palette=None, scale=DEFAULT_SCALE
) -> Scene:
    if n_classes < 2:
        raise DataError("synthetic scenes need at least one object class")
    palette = tuple(palette) if palette is not None else default_palette(n_classes)
    if not palette or min(palette) < 1 or max(palette) >= n_classes:
        raise DataError(f"palette classes must lie in [1, {n_classes})")
    h, w = shape
    gray = rng.uniform(70, 140)
    tint = rng.uniform(-15, 15, 3)
    image = np.empty((h, w, 3))
    image[:] = gray + tint
    image += _texture(rng, h, w, rng.uniform(5, 15))[..., None]
    layout = np.zeros((h, w), dtype=np.int32)

    for _ in range(int(rng.integers(2, 5))):
        slot = int(rng.integers(len(palette)))
        k = palette[slot]
        region = _shape_mask(rng, h, w, scale)
        color = _class_color(rng, slot, len(palette))
        image[region] = color + _texture(rng, h, w, rng.uniform(4, 12))[region][:, None]
        layout[region] = k

    image += rng.normal(0, 3, image.shape)
    image = np.clip(np.floor(image + 0.5), 0, 255).astype(np.uint8)
    objects = set(np.unique(layout).tolist()) - {0}
    top = preferred_class(objects)
    mask = (layout == top).astype(np.uint8)
    return Scene(image, layout, mask, near_one_hot(layout, n_classes), top)


def generate_scenes(
    count: int, seed: int, n_classes: int = N_CLASSES, shape=DEFAULT_SHAPE, palette=None, scale=DEFAULT_SCALE
):
    """Yield ``count`` scenes; scene ``i`` depends only on ``(seed, i)``."""
    if count < 1:
        raise DataError("count must be >= 1")
    for child in np.random.SeedSequence(seed).spawn(count):
        yield make_scene(np.random.default_rng(child), n_classes, shape, palette, scale)


def write_dataset(
    out_dir,
    count: int,
    seed: int,
    n_classes: int = N_CLASSES,
    split: str = "train",
    shape=DEFAULT_SHAPE,
    prefix: str = "scene",
    palette=None,
):
    """Write images, masks, SPST tensors and ``manifest.tsv`` under ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, scene in enumerate(generate_scenes(count, seed, n_classes, shape, palette)):
        stem = f"{prefix}_{i:04d}"
        image_path = out_dir / f"{stem}.png"
        mask_path = out_dir / f"{stem}_mask.png"
        tensor_path = out_dir / f"{stem}.spst"
        write_image(scene.image, image_path)
        write_mask(scene.mask, mask_path)
        write_score_tensor(scene.scores, tensor_path)
        entries.append(ManifestEntry(image_path, mask_path, tensor_path))
    manifest = DatasetManifest(tuple(entries), split)
    write_manifest(manifest, out_dir / "manifest.tsv")
    return manifest
