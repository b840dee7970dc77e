"""SGD training of :class:`TinySSD` on in-memory samples."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..augment import AugmentConfig, augment_pipeline, resize, sample_rng
from ..dataio import ImageSample
from ..inference import InferenceConfig, detect_arrays
from ..evaluation import EvalConfig, evaluate
from ..loss import multibox_loss
from ..matching import match
from ..priors import LayerSpec, PriorSet, boundary_filter, build_priors
from .checkpoint import Checkpoint
from .model import NetSpec, TinySSD

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    lr: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 5e-4
    iterations: int = 5000
    batch_size: int = 1
    lr_steps: tuple[int, ...] = ()
    lr_gamma: float = 0.1
    seed: int = 0
    alpha: float = 1.0
    neg_ratio: float = 3.0
    match_threshold: float = 0.5
    use_boundary_boxes: bool = True
    augment: bool = True
    expand: bool = True
    l2norm_init: float = 20.0

    def __post_init__(self):
        self.lr_steps = tuple(int(s) for s in self.lr_steps)
        if self.lr < 0 or self.iterations < 0 or self.batch_size < 1:
            raise ValueError("need lr >= 0, iterations >= 0, batch_size >= 1")

    def lr_at(self, it: int) -> float:
        return self.lr * self.lr_gamma ** sum(it >= s for s in self.lr_steps)


@dataclass
class SGD:
    """Momentum SGD with L2 weight decay folded into the velocity.

    ``v <- momentum * v + grad + weight_decay * param``; ``param <- param - lr * v``.
    """

    momentum: float = 0.9
    weight_decay: float = 5e-4
    no_decay: Callable[[str], bool] = lambda name: not name.endswith(".w")
    velocity: dict = field(default_factory=dict)

    def step(self, params: dict, grads: dict, lr: float) -> None:
        for name, p in params.items():
            g = grads[name]
            if g.shape != p.shape:
                raise ValueError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
            wd = 0.0 if self.no_decay(name) else self.weight_decay
            v = self.velocity.get(name)
            v = g + wd * p if v is None else self.momentum * v + g + wd * p
            self.velocity[name] = v.astype(p.dtype, copy=False)
            p -= (lr * v).astype(p.dtype, copy=False)


def sgd_step(params, grads, velocity, lr, momentum=0.9, weight_decay=0.0005):
    """Functional form of :meth:`SGD.step` applying ``weight_decay`` to every parameter."""
    opt = SGD(momentum, weight_decay, lambda name: False, velocity)
    opt.step(params, grads, lr)


@dataclass
class TrainResult:
    model: TinySSD
    checkpoint: Checkpoint
    losses: np.ndarray


def training_priors(specs: Sequence[LayerSpec], use_boundary_boxes: bool = True):
    """Priors used for matching, plus the network rows they correspond to."""
    priors = build_priors(specs)
    if use_boundary_boxes:
        return priors, np.arange(priors.total)
    return boundary_filter(priors)


def prepare_batch(samples, priors: PriorSet, cfg: TrainConfig):
    """Stack pixels and match each sample against ``priors``."""
    assignments = [match(priors, s.boxes, s.labels, cfg.match_threshold) for s in samples]
    return np.stack([s.pixels for s in samples]), assignments


def train(netspec: NetSpec, specs: Sequence[LayerSpec], dataset: Sequence[ImageSample],
          cfg: TrainConfig | None = None, aug: AugmentConfig | None = None,
          callback: Callable[[int, float], None] | None = None) -> TrainResult:
    """
    Train from xavier-initialized weights.

    Each iteration draws ``batch_size`` samples (a fresh permutation per
    epoch), augments them, matches, evaluates the loss and takes one SGD
    step. When boundary boxes are disabled, rows of priors crossing the
    image border never become positive or mined negatives.

    Raises:
        FloatingPointError: on a non-finite loss, naming the iteration.
    """
    cfg = cfg or TrainConfig()
    aug = aug or AugmentConfig()
    netspec.check_priors(specs)
    priors, rows = training_priors(specs, cfg.use_boundary_boxes)
    num_rows = netspec.num_priors
    model = TinySSD(netspec, np.float32)
    model.init_params(np.random.default_rng([cfg.seed, 7919]), cfg.l2norm_init)
    opt = SGD(cfg.momentum, cfg.weight_decay)
    n = len(dataset)
    losses = np.zeros(cfg.iterations)
    order = np.zeros(0, dtype=np.int64)
    epoch = cursor = 0
    for it in range(cfg.iterations):
        batch = []
        for _ in range(cfg.batch_size):
            if cursor >= len(order):
                order = np.random.default_rng([cfg.seed, epoch, 104729]).permutation(n)
                epoch += 1
                cursor = 0
            idx = int(order[cursor])
            cursor += 1
            s = dataset[idx]
            if cfg.augment:
                s = augment_pipeline(s, aug, sample_rng(cfg.seed, idx, epoch), netspec.input_size, cfg.expand)
            else:
                s = resize(s, netspec.input_size)
            batch.append(s)
        images, assignments = prepare_batch(batch, priors, cfg)
        conf, loc, cache = model.forward(images, training=True)
        if len(rows) != num_rows:
            report = _filtered_loss(conf, loc, assignments, rows, cfg)
        else:
            report = multibox_loss(conf, loc, assignments, cfg.alpha, cfg.neg_ratio)
        if not np.isfinite(report.total):
            raise FloatingPointError(f"non-finite loss at iteration {it}")
        losses[it] = report.total
        grads = model.backward(report.grad_conf, report.grad_loc, cache)
        opt.step(model.params, grads, cfg.lr_at(it))
        if callback is not None:
            callback(it, report.total)
        if it % 500 == 0:
            log.info("iter %d loss %.4f lr %g", it, report.total, cfg.lr_at(it))
    ckpt = Checkpoint({k: v.copy() for k, v in model.params.items()}, cfg.iterations, cfg.seed)
    return TrainResult(model, ckpt, losses)


def _filtered_loss(conf, loc, assignments, rows, cfg):
    # rows outside ``rows`` are neither positives nor mined negatives
    report = multibox_loss(conf[:, rows], loc[:, rows], assignments, cfg.alpha, cfg.neg_ratio)
    gc = np.zeros(conf.shape)
    gl = np.zeros(loc.shape)
    gc[:, rows] = report.grad_conf
    gl[:, rows] = report.grad_loc
    report.grad_conf, report.grad_loc = gc, gl
    return report


def predict(model: TinySSD, samples: Sequence[ImageSample], specs: Sequence[LayerSpec],
            cfg: InferenceConfig | None = None, use_boundary_boxes: bool = True, batch_size: int = 50):
    """Detections per sample as lists of (label, score, box) arrays."""
    priors, rows = training_priors(specs, use_boundary_boxes)
    out = []
    for start in range(0, len(samples), batch_size):
        chunk = [resize(s, model.spec.input_size) for s in samples[start:start + batch_size]]
        conf, loc, _ = model.forward(np.stack([s.pixels for s in chunk]))
        for b in range(len(chunk)):
            out.append(detect_arrays(conf[b, rows], loc[b, rows], priors, cfg))
    return out


def evaluate_model(model, samples, specs, inference: InferenceConfig | None = None,
                   eval_cfg: EvalConfig | None = None, use_boundary_boxes: bool = True):
    """Per-class AP and mAP of ``model`` on ``samples``."""
    preds = predict(model, samples, specs, inference, use_boundary_boxes)
    dets = [
        (i, int(l), float(s), b)
        for i, (labels, scores, boxes) in enumerate(preds)
        for l, s, b in zip(labels, scores, boxes)
    ]
    gts = dict(enumerate(samples))
    return evaluate(dets, gts, range(1, model.spec.num_classes + 1), eval_cfg)
