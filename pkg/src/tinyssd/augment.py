"""
Training-time sampling: photometric jitter, zoom-out canvas expansion,
constrained random crops, resize and horizontal flip.

Every op takes an explicit ``numpy.random.Generator``; use
:func:`sample_rng` to derive an independent stream per (seed, epoch, index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import cv2
import numpy as np

from .dataio import ImageSample
from .geometry import area, iou_matrix

#: option id for "keep the whole image"
WHOLE = "whole"
#: option id for "unconstrained random patch"
RANDOM = "random"


@dataclass
class AugmentConfig:
    min_jaccard_options: tuple[float, ...] = (0.1, 0.3, 0.5, 0.7, 0.9)
    patch_area_range: tuple[float, float] = (0.1, 1.0)
    patch_aspect_range: tuple[float, float] = (0.5, 2.0)
    flip_prob: float = 0.5
    expansion_max_area: float = 16.0
    expand_prob: float = 0.5
    mean_fill: float | tuple[float, ...] = 0.5
    max_attempts: int = 50
    brightness_delta: float = 0.12
    contrast_range: tuple[float, float] = (0.5, 1.5)

    def __post_init__(self):
        self.min_jaccard_options = tuple(float(v) for v in self.min_jaccard_options)
        self.patch_area_range = tuple(float(v) for v in self.patch_area_range)
        self.patch_aspect_range = tuple(float(v) for v in self.patch_aspect_range)
        self.contrast_range = tuple(float(v) for v in self.contrast_range)
        if isinstance(self.mean_fill, list):
            self.mean_fill = tuple(float(v) for v in self.mean_fill)
        lo, hi = self.patch_area_range
        if not 0 < lo < hi <= 1:
            raise ValueError("patch_area_range must satisfy 0 < lo < hi <= 1")
        lo, hi = self.patch_aspect_range
        if not 0 < lo < hi:
            raise ValueError("patch_aspect_range must satisfy 0 < lo < hi")
        for p in (self.flip_prob, self.expand_prob):
            if not 0 <= p <= 1:
                raise ValueError("probabilities must lie in [0, 1]")
        if self.expansion_max_area < 1:
            raise ValueError("expansion_max_area must be >= 1")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")

    @property
    def options(self) -> list:
        return [WHOLE, *self.min_jaccard_options, RANDOM]


def sample_rng(seed: int, index: int = 0, epoch: int = 0) -> np.random.Generator:
    return np.random.default_rng([seed, epoch, index])


def _crop_boxes(boxes, labels, difficult, patch):
    """Keep gts whose centers fall strictly inside ``patch``; clip and renormalize."""
    centers = (boxes[:, :2] + boxes[:, 2:]) / 2
    keep = np.all((centers > patch[:2]) & (centers < patch[2:]), axis=1)
    size = patch[2:] - patch[:2]
    out = boxes[keep].copy()
    out[:, :2] = np.maximum(out[:, :2], patch[:2])
    out[:, 2:] = np.minimum(out[:, 2:], patch[2:])
    out = np.clip((out - np.tile(patch[:2], 2)) / np.tile(size, 2), 0.0, 1.0)
    diff = None if difficult is None else difficult[keep]
    return out, labels[keep], diff, keep


def _draw_patch(h: int, w: int, cfg: AugmentConfig, rng) -> np.ndarray | None:
    """A pixel-aligned patch in normalized coords, or None if it breaks the size limits."""
    frac = rng.uniform(*cfg.patch_area_range)
    aspect = rng.uniform(*cfg.patch_aspect_range)
    pw = max(1, int(round(math.sqrt(frac * aspect) * w)))
    ph = max(1, int(round(math.sqrt(frac / aspect) * h)))
    if pw > w or ph > h:
        return None
    x0 = int(rng.integers(0, w - pw + 1))
    y0 = int(rng.integers(0, h - ph + 1))
    patch = np.array([x0 / w, y0 / h, (x0 + pw) / w, (y0 + ph) / h])
    if not patch_within_limits(patch, cfg):
        return None
    return patch


def patch_within_limits(patch: np.ndarray, cfg: AugmentConfig, eps: float = 1e-12) -> bool:
    pw, ph = patch[2] - patch[0], patch[3] - patch[1]
    lo, hi = cfg.patch_area_range
    alo, ahi = cfg.patch_aspect_range
    return (lo - eps <= pw * ph <= hi + eps) and (alo - eps <= pw / ph <= ahi + eps)


def sample_patch(s: ImageSample, cfg: AugmentConfig, rng, option=None, return_param: bool = False):
    """
    Randomly crop ``s``.

    One option is drawn uniformly from: whole image, each minimum-jaccard
    constraint, unconstrained patch. Constrained and unconstrained patches
    are rejection-sampled up to ``cfg.max_attempts`` times; a patch is
    accepted when its area fraction and aspect ratio are in range, every gt
    overlaps it by at least the drawn minimum IoU, and at least one gt
    center lies inside it. On exhaustion the whole image is used.

    Args:
        option: force an option instead of drawing one (``"whole"``,
            ``"random"`` or a float constraint).
        return_param: also return a dict with ``option``, ``patch`` (corner
            box in input coords) and ``attempts``.
    """
    options = cfg.options
    if option is None:
        option = options[int(rng.integers(len(options)))]
    h, w = s.size
    param = {"option": option, "patch": np.array([0.0, 0.0, 1.0, 1.0]), "attempts": 0}
    out = s
    if option != WHOLE and len(s.boxes) > 0:
        min_iou = 0.0 if option == RANDOM else float(option)
        for attempt in range(1, cfg.max_attempts + 1):
            patch = _draw_patch(h, w, cfg, rng)
            if patch is None:
                continue
            if option != RANDOM and iou_matrix(patch, s.boxes)[0].min() < min_iou:
                continue
            boxes, labels, diff, keep = _crop_boxes(s.boxes, s.labels, s.difficult, patch)
            if not keep.any():
                continue
            x0, y0 = int(round(patch[0] * w)), int(round(patch[1] * h))
            x1, y1 = int(round(patch[2] * w)), int(round(patch[3] * h))
            out = ImageSample(s.pixels[y0:y1, x0:x1].copy(), boxes, labels, diff)
            param.update(patch=patch, attempts=attempt)
            break
        else:
            param.update(option=WHOLE, attempts=cfg.max_attempts)
    if out is s:
        out = s.copy()
    return (out, param) if return_param else out


def expand_canvas(s: ImageSample, cfg: AugmentConfig, rng, ratio=None, offset=None) -> ImageSample:
    """
    Place the image at a random spot of a larger canvas filled with ``cfg.mean_fill``.

    The side ratio is uniform in [1, sqrt(cfg.expansion_max_area)]. ``ratio``
    and ``offset`` (pixel (top, left)) may be fixed for testing.
    """
    h, w = s.size
    if ratio is None:
        ratio = rng.uniform(1.0, math.sqrt(cfg.expansion_max_area))
    ch, cw = int(h * ratio), int(w * ratio)
    if offset is None:
        top = int(rng.integers(0, ch - h + 1))
        left = int(rng.integers(0, cw - w + 1))
    else:
        top, left = offset
    canvas = np.empty((ch, cw) + s.pixels.shape[2:], dtype=s.pixels.dtype)
    canvas[...] = np.asarray(cfg.mean_fill, dtype=s.pixels.dtype)
    canvas[top:top + h, left:left + w] = s.pixels
    boxes = s.boxes * np.array([w, h, w, h]) + np.array([left, top, left, top])
    boxes = boxes / np.array([cw, ch, cw, ch])
    return ImageSample(canvas, boxes, s.labels.copy(), None if s.difficult is None else s.difficult.copy())


def hflip(s: ImageSample, rng, prob: float = 0.5) -> ImageSample:
    if prob <= 0 or rng.uniform() >= prob:
        return s.copy()
    boxes = s.boxes.copy()
    boxes[:, 0], boxes[:, 2] = 1.0 - s.boxes[:, 2], 1.0 - s.boxes[:, 0]
    diff = None if s.difficult is None else s.difficult.copy()
    return ImageSample(s.pixels[:, ::-1].copy(), boxes, s.labels.copy(), diff)


def photometric(s: ImageSample, rng, cfg: AugmentConfig | None = None,
                brightness=None, contrast=None) -> ImageSample:
    """Contrast scale then brightness shift, clamped to [0, 1]. Boxes are untouched."""
    cfg = cfg or AugmentConfig()
    if brightness is None:
        brightness = rng.uniform(-cfg.brightness_delta, cfg.brightness_delta)
    if contrast is None:
        contrast = rng.uniform(*cfg.contrast_range)
    pixels = np.clip(s.pixels * contrast + brightness, 0.0, 1.0).astype(s.pixels.dtype)
    out = s.copy()
    out.pixels = pixels
    return out


def resize(s: ImageSample, size: int) -> ImageSample:
    """Bilinear resize to ``size`` x ``size``; normalized boxes are unchanged."""
    if s.size == (size, size):
        return s.copy()
    pixels = cv2.resize(s.pixels, (size, size), interpolation=cv2.INTER_LINEAR)
    if pixels.ndim == 2 and s.pixels.ndim == 3:
        pixels = pixels[..., None]
    out = s.copy()
    out.pixels = pixels
    return out


def drop_degenerate(s: ImageSample, min_size: float = 1e-6) -> ImageSample:
    wh = s.boxes[:, 2:] - s.boxes[:, :2]
    keep = np.all(wh > min_size, axis=1)
    if keep.all():
        return s
    diff = None if s.difficult is None else s.difficult[keep]
    return ImageSample(s.pixels, s.boxes[keep], s.labels[keep], diff)


def augment_pipeline(s: ImageSample, cfg: AugmentConfig, rng, size: int, expand: bool = True) -> ImageSample:
    """photometric -> (maybe) expand -> crop -> resize -> flip."""
    s = photometric(s, rng, cfg)
    if expand and rng.uniform() < cfg.expand_prob:
        s = expand_canvas(s, cfg, rng)
    s = sample_patch(s, cfg, rng)
    s = resize(s, size)
    s = hflip(s, rng, cfg.flip_prob)
    return drop_degenerate(s)


def mean_object_scale(samples) -> float:
    """Mean sqrt(area) over all boxes of ``samples``."""
    vals = np.concatenate([np.sqrt(area(s.boxes)) for s in samples])
    return float(vals.mean()) if vals.size else 0.0
