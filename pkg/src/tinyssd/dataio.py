"""Image samples and their on-disk formats.

Annotation sidecar: one object per line, ``label xmin ymin xmax ymax`` with
normalized float coordinates. An optional sixth column ``1`` flags the
object as difficult.

Manifest: one image/annotation pair per line, ``<image> <annotation>``,
paths relative to the manifest's directory.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np


@dataclass
class ImageSample:
    """Pixels (H, W, C) in [0, 1] plus corner-form boxes and labels."""

    pixels: np.ndarray
    boxes: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))
    labels: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    difficult: np.ndarray | None = None

    def __post_init__(self):
        self.boxes = np.asarray(self.boxes, dtype=np.float64).reshape(-1, 4)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if len(self.boxes) != len(self.labels):
            raise ValueError("boxes and labels differ in length")

    @property
    def size(self) -> tuple[int, int]:
        return self.pixels.shape[0], self.pixels.shape[1]

    def copy(self) -> "ImageSample":
        return ImageSample(
            self.pixels.copy(), self.boxes.copy(), self.labels.copy(),
            None if self.difficult is None else self.difficult.copy(),
        )


def format_annotation(boxes, labels, difficult=None) -> str:
    lines = []
    for i, (lab, box) in enumerate(zip(np.asarray(labels).tolist(), np.asarray(boxes).tolist())):
        line = f"{lab} " + " ".join(repr(float(v)) for v in box)
        if difficult is not None and difficult[i]:
            line += " 1"
        lines.append(line + "\n")
    return "".join(lines)


def parse_annotation(text: str):
    """Returns (boxes, labels, difficult) arrays."""
    boxes, labels, diff = [], [], []
    for line in text.splitlines():
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) not in (5, 6):
            raise ValueError(f"bad annotation line: {line!r}")
        labels.append(int(parts[0]))
        boxes.append([float(v) for v in parts[1:5]])
        diff.append(len(parts) == 6 and parts[5] == "1")
    return (
        np.array(boxes, dtype=np.float64).reshape(-1, 4),
        np.array(labels, dtype=np.int64),
        np.array(diff, dtype=bool),
    )


def read_image(path) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if img is None:
        raise ValueError(f"cannot read image {path}")
    return cv2.cvtColor(img, cv2.COLOR_BGR2RGB).astype(np.float32) / 255.0


def write_image(path, pixels: np.ndarray) -> None:
    img = np.clip(np.rint(np.asarray(pixels) * 255.0), 0, 255).astype(np.uint8)
    if img.ndim == 3 and img.shape[2] == 3:
        img = cv2.cvtColor(img, cv2.COLOR_RGB2BGR)
    if not cv2.imwrite(str(path), img):
        raise ValueError(f"cannot write image {path}")


def read_manifest(path) -> list[tuple[Path, Path]]:
    path = Path(path)
    pairs = []
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"bad manifest line: {line!r}")
        pairs.append((path.parent / parts[0], path.parent / parts[1]))
    return pairs


def load_sample(image_path, annotation_path) -> ImageSample:
    boxes, labels, diff = parse_annotation(Path(annotation_path).read_text())
    return ImageSample(read_image(image_path), boxes, labels, diff if diff.any() else None)


def load_dataset(manifest) -> list[ImageSample]:
    return [load_sample(img, ann) for img, ann in read_manifest(manifest)]


def save_dataset(samples, out_dir, prefix: str = "") -> Path:
    """Write PNG images, sidecars and ``manifest.txt`` under ``out_dir``."""
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "annotations").mkdir(parents=True, exist_ok=True)
    lines = []
    for i, s in enumerate(samples):
        stem = f"{prefix}{i:06d}"
        img = os.path.join("images", stem + ".png")
        ann = os.path.join("annotations", stem + ".txt")
        write_image(out_dir / img, s.pixels)
        (out_dir / ann).write_text(format_annotation(s.boxes, s.labels, s.difficult))
        lines.append(f"{img} {ann}\n")
    manifest = out_dir / "manifest.txt"
    manifest.write_text("".join(lines))
    return manifest
