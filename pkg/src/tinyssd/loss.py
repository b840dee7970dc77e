"""MultiBox objective: softmax confidence loss plus smooth-L1 box regression."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .matching import MatchAssignment


@dataclass
class LossReport:
    l_conf: float
    l_loc: float
    n_pos: int
    total: float
    grad_conf: np.ndarray
    grad_loc: np.ndarray
    selected_negatives: list


def smooth_l1(x):
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    return np.where(ax < 1, 0.5 * x * x, ax - 0.5)


def smooth_l1_grad(x):
    x = np.asarray(x, dtype=np.float64)
    return np.where(np.abs(x) < 1, x, np.sign(x))


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def hard_negative_select(conf: np.ndarray, assignment: MatchAssignment, ratio: float = 3.0) -> np.ndarray:
    """
    Indices of the negatives with the highest background loss.

    At most ``floor(ratio * N)`` negatives are returned, sorted by decreasing
    loss; equal losses keep ascending prior order.
    """
    if ratio <= 0:
        raise ValueError("ratio must be positive")
    n_pos = assignment.n_pos
    if n_pos == 0:
        return np.zeros(0, dtype=np.int64)
    neg = np.flatnonzero(~assignment.positive)
    budget = min(int(np.floor(ratio * n_pos)), len(neg))
    bg_loss = -log_softmax(np.asarray(conf, dtype=np.float64)[neg])[:, 0]
    order = np.argsort(-bg_loss, kind="stable")
    return neg[order[:budget]]


def conf_loss(conf: np.ndarray, assignment: MatchAssignment, selected_negs: np.ndarray):
    """Softmax cross-entropy over positives and the selected negatives.

    Returns:
        (loss, grad) with grad shaped like ``conf`` and zero on rows that
        do not contribute.
    """
    conf = np.asarray(conf, dtype=np.float64)
    pos = np.flatnonzero(assignment.positive)
    selected_negs = np.asarray(selected_negs, dtype=np.int64)
    if np.intersect1d(pos, selected_negs).size:
        raise ValueError("selected negatives overlap the positives")
    rows = np.concatenate([pos, selected_negs])
    target = np.concatenate([assignment.labels[pos], np.zeros(len(selected_negs), dtype=np.int64)])
    grad = np.zeros_like(conf)
    if len(rows) == 0:
        return 0.0, grad
    logp = log_softmax(conf[rows])
    loss = -logp[np.arange(len(rows)), target].sum()
    g = np.exp(logp)
    g[np.arange(len(rows)), target] -= 1.0
    grad[rows] = g
    return float(loss), grad


def loc_loss(loc: np.ndarray, assignment: MatchAssignment):
    """Smooth-L1 between predicted and target offsets over positive priors."""
    loc = np.asarray(loc, dtype=np.float64)
    pos = assignment.positive
    grad = np.zeros_like(loc)
    diff = loc[pos] - assignment.targets[pos]
    grad[pos] = smooth_l1_grad(diff)
    return float(smooth_l1(diff).sum()), grad


def multibox_loss(
    conf: np.ndarray,
    loc: np.ndarray,
    assignment: MatchAssignment | Sequence[MatchAssignment],
    alpha: float = 1.0,
    neg_ratio: float = 3.0,
) -> LossReport:
    """
    Total loss ``(L_conf + alpha * L_loc) / N`` and its gradients.

    ``conf`` is (P, C+1) and ``loc`` is (P, 4) for a single image. A batch
    may be passed as (B, P, C+1) / (B, P, 4) with one assignment per image;
    negatives are mined per image and N counts positives over the batch.
    Returns an all-zero report when N = 0.
    """
    conf = np.asarray(conf)
    loc = np.asarray(loc)
    if not (np.all(np.isfinite(conf)) and np.all(np.isfinite(loc))):
        raise ValueError("non-finite network outputs")
    batched = conf.ndim == 3
    if not batched:
        conf, loc, assignment = conf[None], loc[None], [assignment]
    if len(assignment) != conf.shape[0] or conf.shape[:2] != loc.shape[:2]:
        raise ValueError("prediction shapes do not agree with the assignments")
    for a in assignment:
        if len(a) != conf.shape[1]:
            raise ValueError(f"assignment covers {len(a)} priors, predictions have {conf.shape[1]}")

    n_pos = sum(a.n_pos for a in assignment)
    grad_conf = np.zeros(conf.shape)
    grad_loc = np.zeros(loc.shape)
    selected = []
    lc_total = ll_total = total = 0.0
    for b, a in enumerate(assignment):
        if n_pos == 0:
            selected.append(np.zeros(0, dtype=np.int64))
            continue
        negs = hard_negative_select(conf[b], a, neg_ratio)
        lc, gc = conf_loss(conf[b], a, negs)
        ll, gl = loc_loss(loc[b], a)
        lc_total += lc
        ll_total += ll
        grad_conf[b] = gc / n_pos
        grad_loc[b] = alpha * gl / n_pos
        selected.append(negs)
    if n_pos:
        total = (lc_total + alpha * ll_total) / n_pos
    if not batched:
        grad_conf, grad_loc, selected = grad_conf[0], grad_loc[0], selected[0]
    return LossReport(lc_total, ll_total, n_pos, total, grad_conf, grad_loc, selected)
