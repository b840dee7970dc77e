"""
Box geometry
============

Boxes are stored as ``(..., 4)`` float arrays in normalized image coordinates.

- corner form: (xmin, ymin, xmax, ymax)
- center form: (cx, cy, w, h)

Offsets are the regression targets relative to a default box:
(t_cx, t_cy, t_w, t_h) = ((g_cx - d_cx) / d_w, (g_cy - d_cy) / d_h,
                          log(g_w / d_w), log(g_h / d_h))
"""

from __future__ import annotations

import numpy as np


def area(boxes: np.ndarray) -> np.ndarray:
    """Area of corner-form boxes; negative extents count as zero."""
    boxes = np.asarray(boxes, dtype=np.float64)
    w = np.clip(boxes[..., 2] - boxes[..., 0], 0.0, None)
    h = np.clip(boxes[..., 3] - boxes[..., 1], 0.0, None)
    return w * h


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Pairwise intersection-over-union between two sets of corner boxes.

    Args:
        a: (N, 4) boxes.
        b: (M, 4) boxes.

    Returns:
        (N, M) IoU values in [0, 1]. Pairs whose union is empty get 0.
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    lt = np.maximum(a[:, None, :2], b[None, :, :2])
    rb = np.minimum(a[:, None, 2:], b[None, :, 2:])
    wh = np.clip(rb - lt, 0.0, None)
    inter = wh[..., 0] * wh[..., 1]
    union = area(a)[:, None] + area(b)[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0)
    return out


def iou(a, b) -> float:
    """IoU of two single corner boxes."""
    return float(iou_matrix(a, b)[0, 0])


def corner_to_center(boxes: np.ndarray) -> np.ndarray:
    boxes = np.asarray(boxes, dtype=np.float64)
    out = np.empty_like(boxes)
    out[..., 0] = (boxes[..., 0] + boxes[..., 2]) / 2
    out[..., 1] = (boxes[..., 1] + boxes[..., 3]) / 2
    out[..., 2] = boxes[..., 2] - boxes[..., 0]
    out[..., 3] = boxes[..., 3] - boxes[..., 1]
    return out


def center_to_corner(boxes: np.ndarray) -> np.ndarray:
    boxes = np.asarray(boxes, dtype=np.float64)
    if np.any(boxes[..., 2:] <= 0):
        raise ValueError("center-form boxes need w > 0 and h > 0")
    half = boxes[..., 2:] / 2
    return np.concatenate([boxes[..., :2] - half, boxes[..., :2] + half], axis=-1)


def encode(gt: np.ndarray, prior: np.ndarray, variances=None) -> np.ndarray:
    """
    Offsets that move center-form ``prior`` boxes onto center-form ``gt`` boxes.

    Args:
        gt: (..., 4) center-form ground truth.
        prior: (..., 4) center-form default boxes, broadcastable against ``gt``.
        variances: optional (center, size) divisors applied to the offsets.
            ``None`` leaves the offsets unscaled.

    Raises:
        ValueError: if any width or height is not strictly positive.
    """
    gt = np.asarray(gt, dtype=np.float64)
    prior = np.asarray(prior, dtype=np.float64)
    if np.any(gt[..., 2:] <= 0) or np.any(prior[..., 2:] <= 0):
        raise ValueError("encode needs strictly positive widths and heights")
    t = np.empty(np.broadcast_shapes(gt.shape, prior.shape))
    t[..., :2] = (gt[..., :2] - prior[..., :2]) / prior[..., 2:]
    t[..., 2:] = np.log(gt[..., 2:] / prior[..., 2:])
    if variances is not None:
        t[..., :2] /= variances[0]
        t[..., 2:] /= variances[1]
    return t


def decode(offsets: np.ndarray, prior: np.ndarray, variances=None) -> np.ndarray:
    """Inverse of :func:`encode`; returns center-form boxes."""
    t = np.array(offsets, dtype=np.float64)
    prior = np.asarray(prior, dtype=np.float64)
    if variances is not None:
        t[..., :2] *= variances[0]
        t[..., 2:] *= variances[1]
    out = np.empty(np.broadcast_shapes(t.shape, prior.shape))
    out[..., :2] = t[..., :2] * prior[..., 2:] + prior[..., :2]
    out[..., 2:] = prior[..., 2:] * np.exp(t[..., 2:])
    return out
