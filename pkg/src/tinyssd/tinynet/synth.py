"""Synthetic shapes on textured backgrounds, with tight box annotations."""

from __future__ import annotations

import cv2
import numpy as np

from ..dataio import ImageSample
from ..geometry import iou_matrix

CLASSES = ("rectangle", "disk", "triangle")


def _background(rng, size: int) -> np.ndarray:
    coarse = rng.uniform(0.15, 0.85, size=(4, 4, 3)).astype(np.float32)
    smooth = cv2.resize(coarse, (size, size), interpolation=cv2.INTER_CUBIC)
    fine = rng.normal(0.0, 0.06, size=(size, size, 3)).astype(np.float32)
    return np.clip(smooth + fine, 0.0, 1.0)


def _shape_mask(kind: int, x0, y0, w, h, size: int, orientation: int) -> np.ndarray:
    c = (np.arange(size) + 0.5) / size
    yy, xx = np.meshgrid(c, c, indexing="ij")
    u = (xx - x0) / w  # unit square coords of the shape's frame
    v = (yy - y0) / h
    inside = (u >= 0) & (u <= 1) & (v >= 0) & (v <= 1)
    if kind == 1:
        return inside
    if kind == 2:
        return (u - 0.5) ** 2 + (v - 0.5) ** 2 <= 0.25
    # triangle with its apex on one of the four sides
    if orientation == 1:
        v = 1 - v
    elif orientation == 2:
        u, v = v, u
    elif orientation == 3:
        u, v = v, 1 - u
    return inside & (np.abs(u - 0.5) <= v / 2)


def _tight_box(mask: np.ndarray) -> np.ndarray | None:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size < 2 or cols.size < 2:
        return None
    size = mask.shape[0]
    return np.array([cols[0], rows[0], cols[-1] + 1, rows[-1] + 1], dtype=np.float64) / size


def synth_image(rng, image_size: int = 64, side_range=(0.15, 0.7), max_objects: int = 3,
                max_iou: float = 0.3, attempts: int = 30) -> ImageSample:
    """
    One image with 1..max_objects shapes.

    Objects never share pixels and their boxes overlap by at most
    ``max_iou``. Boxes are the pixel extent of each shape, so every shape
    touches all four edges of its box.
    """
    pixels = _background(rng, image_size)
    n_target = int(rng.integers(1, max_objects + 1))
    occupied = np.zeros((image_size, image_size), bool)
    boxes, labels = [], []
    for n in range(n_target):
        label = int(rng.integers(1, len(CLASSES) + 1))
        for _ in range(attempts if n else 1000):
            w = rng.uniform(*side_range)
            h = w if label == 2 else rng.uniform(*side_range)
            x0 = rng.uniform(0, 1 - w)
            y0 = rng.uniform(0, 1 - h)
            mask = _shape_mask(label, x0, y0, w, h, image_size, int(rng.integers(4)))
            box = _tight_box(mask)
            if box is None or (mask & occupied).any():
                continue
            if boxes and iou_matrix(box, np.array(boxes)).max() > max_iou:
                continue
            break
        else:
            break
        local = pixels[mask].mean(axis=0)
        while True:
            color = rng.uniform(0, 1, size=3).astype(np.float32)
            if np.abs(color - local).max() > 0.35:
                break
        shade = color + rng.normal(0, 0.03, size=(int(mask.sum()), 3)).astype(np.float32)
        pixels[mask] = np.clip(shade, 0, 1)
        occupied |= mask
        boxes.append(box)
        labels.append(label)
    pixels = np.rint(pixels * 255).astype(np.float32) / 255
    return ImageSample(pixels, np.array(boxes), np.array(labels))


def synth_dataset(seed: int, n_images: int, image_size: int = 64, **kwargs) -> list[ImageSample]:
    """``n_images`` samples; image i depends only on (seed, i)."""
    if n_images < 1:
        raise ValueError("n_images must be >= 1")
    return [synth_image(np.random.default_rng([seed, i]), image_size, **kwargs) for i in range(n_images)]
