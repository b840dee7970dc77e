"""Two-phase assignment of ground-truth boxes to default boxes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import area, corner_to_center, encode, iou_matrix
from .priors import PriorSet


@dataclass
class MatchAssignment:
    """Per-prior matching outcome.

    Attributes:
        labels: (P,) class index of the matched gt, 0 for negatives.
        gt_index: (P,) index into the caller's gt list, -1 for negatives.
        targets: (P, 4) encoded offsets; zero rows for negatives.
        iou: (P,) best IoU of each prior over all gts (0 without gts).
        bipartite: (P,) True where the prior was claimed in the first phase.
    """

    labels: np.ndarray
    gt_index: np.ndarray
    targets: np.ndarray
    iou: np.ndarray
    bipartite: np.ndarray

    @property
    def positive(self) -> np.ndarray:
        return self.labels > 0

    @property
    def n_pos(self) -> int:
        return int(np.count_nonzero(self.labels))

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, index: np.ndarray) -> "MatchAssignment":
        return MatchAssignment(
            self.labels[index], self.gt_index[index], self.targets[index],
            self.iou[index], self.bipartite[index],
        )


def empty_assignment(num_priors: int) -> MatchAssignment:
    return MatchAssignment(
        np.zeros(num_priors, dtype=np.int64),
        np.full(num_priors, -1, dtype=np.int64),
        np.zeros((num_priors, 4)),
        np.zeros(num_priors),
        np.zeros(num_priors, dtype=bool),
    )


def match(
    priors: PriorSet | np.ndarray,
    gt_boxes: np.ndarray,
    gt_labels: np.ndarray,
    threshold: float = 0.5,
    variances=None,
) -> MatchAssignment:
    """
    Assign gts to priors.

    First every gt claims its best-overlapping prior, taken greedily in
    descending order of available overlap; a claimed prior is no longer
    available. Then each unclaimed prior whose best IoU exceeds
    ``threshold`` becomes positive for that best gt.

    Args:
        priors: PriorSet or (P, 4) center-form boxes.
        gt_boxes: (G, 4) corner boxes in [0, 1].
        gt_labels: (G,) labels >= 1.
        threshold: strict lower bound on IoU for the second phase.

    Zero-area gts are ignored. Ties go to the lowest gt index, then the
    lowest prior index.
    """
    prior_boxes = priors.boxes if isinstance(priors, PriorSet) else np.asarray(priors, dtype=np.float64)
    num_priors = len(prior_boxes)
    if num_priors == 0:
        raise ValueError("match needs at least one prior")
    out = empty_assignment(num_priors)
    gt_boxes = np.asarray(gt_boxes, dtype=np.float64).reshape(-1, 4)
    gt_labels = np.asarray(gt_labels, dtype=np.int64).reshape(-1)
    if len(gt_boxes) != len(gt_labels):
        raise ValueError("gt_boxes and gt_labels differ in length")
    if np.any(gt_labels < 1):
        raise ValueError("gt labels must be >= 1; 0 is background")

    keep = np.flatnonzero(area(gt_boxes) > 0)
    if len(keep) == 0:
        return out
    boxes = gt_boxes[keep]
    prior_corners = np.concatenate(
        [prior_boxes[:, :2] - prior_boxes[:, 2:] / 2, prior_boxes[:, :2] + prior_boxes[:, 2:] / 2], axis=1
    )
    overlaps = iou_matrix(boxes, prior_corners)  # (G, P)

    # argmax returns the first maximum, so ties resolve to the lowest index
    best_gt = overlaps.argmax(axis=0)
    best_iou = overlaps[best_gt, np.arange(num_priors)]
    out.iou[:] = best_iou

    assigned = np.full(num_priors, -1, dtype=np.int64)
    available = overlaps.copy()
    for _ in range(len(boxes)):
        flat = int(available.argmax())
        g, p = divmod(flat, num_priors)
        if available[g, p] <= 0:
            break
        assigned[p] = g
        out.bipartite[p] = True
        available[g, :] = -1.0
        available[:, p] = -1.0

    second = (assigned < 0) & (best_iou > threshold)
    assigned[second] = best_gt[second]

    pos = np.flatnonzero(assigned >= 0)
    g = assigned[pos]
    out.gt_index[pos] = keep[g]
    out.labels[pos] = gt_labels[keep][g]
    out.targets[pos] = encode(corner_to_center(boxes[g]), prior_boxes[pos], variances)
    return out


def write_csv(assignment: MatchAssignment, fh) -> None:
    fh.write("prior_index,status,gt_index,label,iou\n")
    for i, (lab, g, v) in enumerate(
        zip(assignment.labels.tolist(), assignment.gt_index.tolist(), assignment.iou.tolist())
    ):
        fh.write(f"{i},{'pos' if lab > 0 else 'neg'},{g},{lab},{v!r}\n")
