"""Finite-difference checks for the loss and network gradients."""

from __future__ import annotations

import numpy as np

from .loss import multibox_loss
from .matching import empty_assignment, match
from .priors import build_priors, toy_specs
from .tinynet.model import NetSpec, TinySSD


def finite_difference(fn, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central differences of scalar ``fn`` w.r.t. every entry of ``x`` (restored afterwards)."""
    grad = np.zeros(x.shape)
    flat = x.reshape(-1)
    g = grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + step
        up = fn(x)
        flat[i] = old - step
        down = fn(x)
        flat[i] = old
        g[i] = (up - down) / (2 * step)
    return grad


def max_rel_error(analytic, numeric, abs_floor: float = 1e-6) -> float:
    """Largest |a - n| / max(|a|, |n|), ignoring entries whose absolute gap is within ``abs_floor``."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    gap = np.abs(a - n)
    scale = np.maximum(np.abs(a), np.abs(n))
    rel = np.where(gap <= abs_floor, 0.0, gap / np.where(scale > 0, scale, 1.0))
    return float(rel.max()) if rel.size else 0.0


def random_loss_instance(rng, num_priors: int, num_classes: int, pos_prob: float = 0.3, min_pos: int = 1):
    """Random logits, offsets and a matching with random labels and targets."""
    labels = np.where(rng.uniform(size=num_priors) < pos_prob, rng.integers(1, num_classes + 1, num_priors), 0)
    if np.count_nonzero(labels) < min_pos:
        labels[rng.choice(num_priors, size=min(min_pos, num_priors), replace=False)] = rng.integers(
            1, num_classes + 1, size=min(min_pos, num_priors)
        )
    a = empty_assignment(num_priors)
    a.labels[:] = labels
    a.targets[labels > 0] = rng.normal(0, 1.0, size=(int(np.count_nonzero(labels)), 4))
    a.gt_index[labels > 0] = 0
    conf = rng.normal(0, 2.0, size=(num_priors, num_classes + 1))
    loc = rng.normal(0, 1.0, size=(num_priors, 4))
    return conf, loc, a


def loss_gradcheck(rng, instances: int = 20) -> float:
    """Max relative error of multibox gradients over random instances."""
    worst = 0.0
    for _ in range(instances):
        conf, loc, a = random_loss_instance(rng, int(rng.integers(2, 17)), int(rng.integers(1, 5)))
        r = multibox_loss(conf, loc, a)
        num_c = finite_difference(lambda c: multibox_loss(c, loc, a).total, conf)
        num_l = finite_difference(lambda l: multibox_loss(conf, l, a).total, loc)
        worst = max(worst, max_rel_error(r.grad_conf, num_c), max_rel_error(r.grad_loc, num_l))
    return worst


def toy_net(rng, input_size: int = 16, channels: int = 2, width: int = 3, num_classes: int = 2):
    """A float64 net with random weights and biases, heads at grids 4, 2, 1."""
    spec = NetSpec(input_size, channels, (width,) * 4, (1, 2, 3), (4, 4, 4), num_classes, True)
    net = TinySSD(spec, np.float64)
    net.init_params(rng)
    for name, p in net.params.items():
        if name.endswith(".b"):
            p[...] = rng.normal(0, 0.1, size=p.shape)
        elif name == "l2norm.gamma":
            p[...] = rng.uniform(5, 25, size=p.shape)
    return net, toy_specs(spec.head_grids)


def net_gradcheck(rng) -> float:
    """Max relative error of every parameter gradient of the loss through a toy net."""
    net, specs = toy_net(rng)
    priors = build_priors(specs)
    image = rng.uniform(0, 1, size=(1, net.spec.input_size, net.spec.input_size, net.spec.channels))
    gts = np.array([[0.1, 0.15, 0.5, 0.6], [0.45, 0.4, 0.95, 0.9]])
    a = match(priors, gts, [1, 2])

    def loss_of(_):
        conf, loc, _ = net.forward(image)
        return multibox_loss(conf[0], loc[0], a).total

    conf, loc, cache = net.forward(image, training=True)
    r = multibox_loss(conf[0], loc[0], a)
    grads = net.backward(r.grad_conf, r.grad_loc, cache)
    worst = 0.0
    for name, p in net.params.items():
        worst = max(worst, max_rel_error(grads[name], finite_difference(loss_of, p)))
    return worst
