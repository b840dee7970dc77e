"""A small single-shot detector: conv/ReLU/pool stages with 3x3 predictor heads."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..priors import LayerSpec
from . import layers as L


@dataclass
class NetSpec:
    """
    Attributes:
        input_size: square input side in pixels.
        channels: input channels.
        stage_channels: output width of each conv/ReLU/pool stage. Stage s
            produces a map of side ``input_size / 2**(s+1)``.
        head_layers: stages that feed a predictor head, finest first.
        boxes_per_cell: k for each head.
        num_classes: object classes, background excluded.
        l2norm: scale the first head's features by a learned per-channel
            gamma after L2 normalization.
        pixel_mean: subtracted from every input pixel before the first stage.
    """

    input_size: int = 64
    channels: int = 3
    stage_channels: tuple[int, ...] = (16, 32, 64, 64, 64, 64)
    head_layers: tuple[int, ...] = (2, 3, 4, 5)
    boxes_per_cell: tuple[int, ...] = (4, 4, 4, 4)
    num_classes: int = 3
    l2norm: bool = True
    pixel_mean: float = 0.5

    def __post_init__(self):
        self.stage_channels = tuple(int(c) for c in self.stage_channels)
        self.head_layers = tuple(int(h) for h in self.head_layers)
        self.boxes_per_cell = tuple(int(k) for k in self.boxes_per_cell)
        if len(self.head_layers) != len(self.boxes_per_cell):
            raise ValueError("one boxes_per_cell entry per head is required")
        if not self.head_layers or list(self.head_layers) != sorted(set(self.head_layers)):
            raise ValueError("head_layers must be non-empty, strictly increasing")
        if self.head_layers[-1] >= len(self.stage_channels):
            raise ValueError("head layer index beyond the last stage")
        for s in range(len(self.stage_channels)):
            if self.input_size % 2 ** (s + 1):
                raise ValueError(f"input_size {self.input_size} cannot be halved {s + 1} times")

    def grid_size(self, stage: int) -> int:
        return self.input_size // 2 ** (stage + 1)

    @property
    def head_grids(self) -> tuple[int, ...]:
        return tuple(self.grid_size(s) for s in self.head_layers)

    @property
    def num_priors(self) -> int:
        return sum(g * g * k for g, k in zip(self.head_grids, self.boxes_per_cell))

    def check_priors(self, specs: Sequence[LayerSpec]) -> None:
        grids = tuple(s.grid_size for s in specs)
        ks = tuple(s.boxes_per_cell for s in specs)
        if grids != self.head_grids or ks != self.boxes_per_cell:
            raise ValueError(
                f"priors (grids {grids}, k {ks}) do not fit the heads "
                f"(grids {self.head_grids}, k {self.boxes_per_cell})"
            )


def xavier_uniform(rng, shape, dtype, mode: str = "fan_in") -> np.ndarray:
    """Uniform in [-a, a] with variance 1/n.

    ``mode="fan_in"`` takes n as the fan-in (the common "xavier" filler in
    detection code); ``mode="average"`` uses the mean of fan-in and fan-out.
    """
    fan_in = shape[0] * shape[1] * shape[2]
    fan_out = shape[0] * shape[1] * shape[3]
    if mode == "fan_in":
        n = fan_in
    elif mode == "average":
        n = (fan_in + fan_out) / 2
    else:
        raise ValueError(f"unknown xavier mode {mode!r}")
    a = np.sqrt(3.0 / n)
    return rng.uniform(-a, a, size=shape).astype(dtype)


class TinySSD:
    """Parameters live in ``self.params`` (name -> array)."""

    def __init__(self, spec: NetSpec, dtype=np.float32, params: dict | None = None):
        self.spec = spec
        self.dtype = np.dtype(dtype)
        self.params = params if params is not None else self.zero_params()

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        sp = self.spec
        shapes = {}
        cin = sp.channels
        for s, cout in enumerate(sp.stage_channels):
            shapes[f"stage{s}.w"] = (3, 3, cin, cout)
            shapes[f"stage{s}.b"] = (cout,)
            cin = cout
        for h, (stage, k) in enumerate(zip(sp.head_layers, sp.boxes_per_cell)):
            c = sp.stage_channels[stage]
            shapes[f"head{h}.conf.w"] = (3, 3, c, k * (sp.num_classes + 1))
            shapes[f"head{h}.conf.b"] = (k * (sp.num_classes + 1),)
            shapes[f"head{h}.loc.w"] = (3, 3, c, k * 4)
            shapes[f"head{h}.loc.b"] = (k * 4,)
        if sp.l2norm:
            shapes["l2norm.gamma"] = (sp.stage_channels[sp.head_layers[0]],)
        return shapes

    def zero_params(self) -> dict[str, np.ndarray]:
        return {k: np.zeros(v, dtype=self.dtype) for k, v in self.param_shapes().items()}

    def init_params(self, rng, gamma: float = 20.0) -> None:
        for name, shape in self.param_shapes().items():
            if name.endswith(".w"):
                self.params[name] = xavier_uniform(rng, shape, self.dtype)
            elif name == "l2norm.gamma":
                self.params[name] = np.full(shape, gamma, dtype=self.dtype)
            else:
                self.params[name] = np.zeros(shape, dtype=self.dtype)

    def astype(self, dtype) -> "TinySSD":
        return TinySSD(self.spec, dtype, {k: v.astype(dtype) for k, v in self.params.items()})

    def forward(self, images: np.ndarray, training: bool = False):
        """
        Args:
            images: (B, H, W, C) or (H, W, C) pixels.

        Returns:
            conf (B, P, num_classes + 1), loc (B, P, 4), and the activation
            cache (None unless ``training``). Rows follow the prior order:
            head, then cell row, then cell column, then box within the cell.
        """
        sp, p = self.spec, self.params
        x = np.asarray(images, dtype=self.dtype)
        if x.ndim == 3:
            x = x[None]
        if x.shape[1:] != (sp.input_size, sp.input_size, sp.channels):
            raise ValueError(
                f"expected images of shape (*, {sp.input_size}, {sp.input_size}, {sp.channels}), got {x.shape}"
            )
        x = x - self.dtype.type(sp.pixel_mean)
        check = _check_finite if training else _noop
        bsz = x.shape[0]
        caches = {}
        feats = {}
        for s in range(len(sp.stage_channels)):
            x, c_conv = L.conv3x3_forward(x, p[f"stage{s}.w"], p[f"stage{s}.b"])
            x, c_relu = L.relu_forward(x)
            x, c_pool = L.maxpool2_forward(x)
            check(x, f"stage{s}")
            caches[f"stage{s}"] = (c_conv, c_relu, c_pool)
            feats[s] = x
        confs, locs = [], []
        ncls = sp.num_classes + 1
        for h, stage in enumerate(sp.head_layers):
            f = feats[stage]
            if h == 0 and sp.l2norm:
                f, caches["l2norm"] = L.l2norm_forward(f, p["l2norm.gamma"])
            conf, c_conf = L.conv3x3_forward(f, p[f"head{h}.conf.w"], p[f"head{h}.conf.b"])
            loc, c_loc = L.conv3x3_forward(f, p[f"head{h}.loc.w"], p[f"head{h}.loc.b"])
            check(conf, f"head{h}.conf")
            check(loc, f"head{h}.loc")
            caches[f"head{h}"] = (c_conf, c_loc, conf.shape, loc.shape)
            confs.append(conf.reshape(bsz, -1, ncls))
            locs.append(loc.reshape(bsz, -1, 4))
        conf = np.concatenate(confs, axis=1)
        loc = np.concatenate(locs, axis=1)
        return conf, loc, (caches if training else None)

    def backward(self, grad_conf: np.ndarray, grad_loc: np.ndarray, cache) -> dict[str, np.ndarray]:
        """Parameter gradients given d(loss)/d(conf) and d(loss)/d(loc)."""
        if cache is None:
            raise ValueError("backward needs the cache of a training-mode forward pass")
        sp = self.spec
        grad_conf = np.asarray(grad_conf, dtype=self.dtype)
        grad_loc = np.asarray(grad_loc, dtype=self.dtype)
        if grad_conf.ndim == 2:
            grad_conf, grad_loc = grad_conf[None], grad_loc[None]
        grads = {}
        dfeat = {}
        start = 0
        for h, stage in enumerate(sp.head_layers):
            c_conf, c_loc, conf_shape, loc_shape = cache[f"head{h}"]
            n = conf_shape[1] * conf_shape[2] * sp.boxes_per_cell[h]
            gc = grad_conf[:, start:start + n].reshape(conf_shape)
            gl = grad_loc[:, start:start + n].reshape(loc_shape)
            start += n
            dx1, grads[f"head{h}.conf.w"], grads[f"head{h}.conf.b"] = L.conv3x3_backward(gc, c_conf)
            dx2, grads[f"head{h}.loc.w"], grads[f"head{h}.loc.b"] = L.conv3x3_backward(gl, c_loc)
            d = dx1 + dx2
            if h == 0 and sp.l2norm:
                d, grads["l2norm.gamma"] = L.l2norm_backward(d, cache["l2norm"])
            dfeat[stage] = d
        dx = None
        for s in reversed(range(len(sp.stage_channels))):
            if s in dfeat:
                dx = dfeat[s] if dx is None else dx + dfeat[s]
            c_conv, c_relu, c_pool = cache[f"stage{s}"]
            if dx is None:
                # stages above the last head receive no gradient
                grads[f"stage{s}.w"] = np.zeros_like(self.params[f"stage{s}.w"])
                grads[f"stage{s}.b"] = np.zeros_like(self.params[f"stage{s}.b"])
                continue
            dx = L.maxpool2_backward(dx, c_pool)
            dx = L.relu_backward(dx, c_relu)
            dx, grads[f"stage{s}.w"], grads[f"stage{s}.b"] = L.conv3x3_backward(dx, c_conv)
        return grads


def _check_finite(x, where):
    if not np.all(np.isfinite(x)):
        raise FloatingPointError(f"non-finite activations after {where}")


def _noop(x, where):
    pass
