"""Decoding raw predictions into detections."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import decode, iou_matrix
from .loss import log_softmax
from .priors import PriorSet


@dataclass(frozen=True)
class Detection:
    label: int
    score: float
    box: tuple[float, float, float, float]


@dataclass
class InferenceConfig:
    conf_threshold: float = 0.01
    nms_iou: float = 0.45
    top_k: int = 200

    def __post_init__(self):
        if not 0 < self.conf_threshold < 1 or not 0 < self.nms_iou < 1:
            raise ValueError("conf_threshold and nms_iou must lie in (0, 1)")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")


def nms(boxes: np.ndarray, scores: np.ndarray, iou_threshold: float = 0.45) -> np.ndarray:
    """
    Greedy non-maximum suppression.

    Repeatedly keeps the best remaining box and drops every remaining box
    whose IoU with it exceeds ``iou_threshold``. Equal scores are visited in
    ascending index order.

    Returns:
        Kept indices in descending score order.
    """
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    order = np.argsort(-scores, kind="stable")
    keep = []
    while order.size:
        i = order[0]
        keep.append(i)
        if order.size == 1:
            break
        ov = iou_matrix(boxes[i], boxes[order[1:]])[0]
        order = order[1:][ov <= iou_threshold]
    return np.array(keep, dtype=np.int64)


def detect_arrays(conf: np.ndarray, loc: np.ndarray, priors: PriorSet | np.ndarray,
                  cfg: InferenceConfig | None = None, variances=None):
    """Array form of :func:`detect`.

    Returns:
        labels (D,), scores (D,), boxes (D, 4) sorted by decreasing score.
    """
    cfg = cfg or InferenceConfig()
    prior_boxes = priors.boxes if isinstance(priors, PriorSet) else np.asarray(priors, dtype=np.float64)
    conf = np.asarray(conf, dtype=np.float64)
    loc = np.asarray(loc, dtype=np.float64)
    if conf.ndim != 2 or loc.shape != (len(prior_boxes), 4) or conf.shape[0] != len(prior_boxes):
        raise ValueError(
            f"prediction shapes {conf.shape}/{loc.shape} do not fit {len(prior_boxes)} priors"
        )
    probs = np.exp(log_softmax(conf))
    labels, scores, boxes, rows = [], [], [], []
    decoded = None
    for c in range(1, conf.shape[1]):
        idx = np.flatnonzero(probs[:, c] >= cfg.conf_threshold)
        if idx.size == 0:
            continue
        if decoded is None:
            decoded = np.clip(center_to_corner_safe(decode(loc, prior_boxes, variances)), 0.0, 1.0)
        kept = idx[nms(decoded[idx], probs[idx, c], cfg.nms_iou)]
        labels.append(np.full(kept.size, c, dtype=np.int64))
        scores.append(probs[kept, c])
        boxes.append(decoded[kept])
        rows.append(kept)
    if not labels:
        return np.zeros(0, np.int64), np.zeros(0), np.zeros((0, 4))
    labels, scores = np.concatenate(labels), np.concatenate(scores)
    boxes, rows = np.concatenate(boxes), np.concatenate(rows)
    order = np.lexsort((labels, rows, -scores))[: cfg.top_k]
    return labels[order], scores[order], boxes[order]


def center_to_corner_safe(boxes: np.ndarray) -> np.ndarray:
    # decoded sizes are exp(.) > 0 but may underflow to 0
    half = boxes[..., 2:] / 2
    return np.concatenate([boxes[..., :2] - half, boxes[..., :2] + half], axis=-1)


def detect(conf, loc, priors, cfg: InferenceConfig | None = None, variances=None) -> list[Detection]:
    """
    Final detections for one image.

    Per class: keep priors scoring at least ``conf_threshold``, decode and
    clip their boxes, run NMS. Classes are then pooled, sorted by score and
    cut to ``top_k``.
    """
    labels, scores, boxes = detect_arrays(conf, loc, priors, cfg, variances)
    return [
        Detection(int(l), float(s), tuple(float(v) for v in b))
        for l, s, b in zip(labels, scores, boxes)
    ]


def format_detections(dets: list[Detection]) -> str:
    return "".join(f"{d.label} {d.score!r} " + " ".join(repr(v) for v in d.box) + "\n" for d in dets)


def parse_detections(text: str) -> list[Detection]:
    dets = []
    for line in text.splitlines():
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 6:
            raise ValueError(f"bad detection line: {line!r}")
        dets.append(Detection(int(parts[0]), float(parts[1]), tuple(float(v) for v in parts[2:])))
    return dets

