"""VOC-style average precision and mAP."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Mapping, Sequence

import numpy as np

from .geometry import iou_matrix


@dataclass
class EvalConfig:
    iou_threshold: float = 0.5
    interpolation: str = "eleven_point"

    def __post_init__(self):
        if not 0 < self.iou_threshold <= 1:
            raise ValueError("iou_threshold must lie in (0, 1]")
        if self.interpolation not in ("eleven_point", "all_points"):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")


@dataclass
class PRCurve:
    recall: np.ndarray
    precision: np.ndarray
    ap: float
    n_gt: int


def eleven_point_ap(recall: np.ndarray, precision: np.ndarray) -> float:
    points = [precision[recall >= t].max(initial=0.0) for t in np.linspace(0, 1, 11)]
    return float(sum(points) / 11)


def all_points_ap(recall: np.ndarray, precision: np.ndarray) -> float:
    """Area under the monotone precision envelope."""
    mrec = np.concatenate([[0.0], recall, [1.0]])
    mpre = np.concatenate([[0.0], precision, [0.0]])
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    step = np.flatnonzero(mrec[1:] != mrec[:-1])
    return float(np.sum((mrec[step + 1] - mrec[step]) * mpre[step + 1]))


def average_precision(
    detections: Sequence[tuple[Hashable, int, float, Sequence[float]]],
    ground_truth: Mapping[Hashable, object],
    cls: int,
    cfg: EvalConfig | None = None,
) -> PRCurve:
    """
    Precision/recall curve and AP for one class.

    Args:
        detections: ``(image_id, label, score, box)`` tuples; other classes
            are ignored.
        ground_truth: image id -> object with ``boxes``, ``labels`` and an
            optional boolean ``difficult`` array.
        cls: class label to score.

    Detections are visited by decreasing score; ties go to the smaller
    image id, then to the earlier detection. Each one is matched to the
    best-overlapping gt of its image; it is a true positive if that overlap
    reaches the threshold and the gt is still unmatched. Difficult gts are
    not counted and detections landing on them are ignored.
    """
    cfg = cfg or EvalConfig()
    gts = {}
    n_gt = 0
    for img, ann in ground_truth.items():
        sel = np.asarray(ann.labels) == cls
        boxes = np.asarray(ann.boxes, dtype=np.float64).reshape(-1, 4)[sel]
        diff = getattr(ann, "difficult", None)
        diff = np.zeros(len(boxes), bool) if diff is None else np.asarray(diff, bool)[sel]
        gts[img] = (boxes, diff, np.zeros(len(boxes), bool))
        n_gt += int(np.count_nonzero(~diff))

    dets = [d for d in detections if d[1] == cls]
    empty = PRCurve(np.zeros(0), np.zeros(0), 0.0, n_gt)
    if n_gt == 0 or not dets:
        return empty

    ids = {d[0] for d in dets}
    try:
        ids = sorted(ids)
    except TypeError:
        ids = sorted(ids, key=repr)
    image_rank = {img: r for r, img in enumerate(ids)}
    order = sorted(range(len(dets)), key=lambda i: (-dets[i][2], image_rank[dets[i][0]], i))
    tp = np.zeros(len(order))
    fp = np.zeros(len(order))
    for rank, i in enumerate(order):
        img, _, _, box = dets[i]
        if img not in gts or len(gts[img][0]) == 0:
            fp[rank] = 1
            continue
        boxes, diff, used = gts[img]
        ov = iou_matrix(np.asarray(box, dtype=np.float64), boxes)[0]
        j = int(ov.argmax())
        if ov[j] >= cfg.iou_threshold:
            if diff[j]:
                continue
            if not used[j]:
                used[j] = True
                tp[rank] = 1
            else:
                fp[rank] = 1
        else:
            fp[rank] = 1

    counted = (tp + fp) > 0
    tp, fp = np.cumsum(tp[counted]), np.cumsum(fp[counted])
    if tp.size == 0:
        return empty
    recall = tp / n_gt
    precision = tp / np.maximum(tp + fp, np.finfo(np.float64).eps)
    if cfg.interpolation == "eleven_point":
        ap = eleven_point_ap(recall, precision)
    else:
        ap = all_points_ap(recall, precision)
    return PRCurve(recall, precision, ap, n_gt)


def mean_ap(aps) -> float:
    aps = list(aps.values()) if isinstance(aps, Mapping) else list(aps)
    if not aps:
        raise ValueError("mean_ap needs at least one class")
    return float(np.mean(aps))


def evaluate(detections, ground_truth, classes, cfg: EvalConfig | None = None):
    """Per-class AP dict and their mean."""
    aps = {c: average_precision(detections, ground_truth, c, cfg).ap for c in classes}
    return aps, mean_ap(aps)
