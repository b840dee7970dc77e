"""Default box tiling over square feature maps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import center_to_corner

ALLOWED_RATIOS = (1.0, 2.0, 3.0, 1 / 2, 1 / 3)


@dataclass(frozen=True)
class LayerSpec:
    """Tiling of one prediction layer.

    The extra box (side sqrt(scale * next_scale)) sits right after the
    ratio-1 box within a cell, or last when ratio 1 is absent.
    """

    grid_size: int
    scale: float
    next_scale: float
    aspect_ratios: tuple[float, ...] = (1.0, 2.0, 0.5)
    include_extra: bool = True

    def __post_init__(self):
        object.__setattr__(self, "aspect_ratios", tuple(float(r) for r in self.aspect_ratios))
        if self.grid_size < 1:
            raise ValueError(f"grid_size must be >= 1, got {self.grid_size}")
        if not 0 < self.scale <= self.next_scale <= 1:
            raise ValueError(f"need 0 < scale <= next_scale <= 1, got {self.scale}, {self.next_scale}")
        if not self.aspect_ratios:
            raise ValueError("aspect_ratios must be non-empty")
        for r in self.aspect_ratios:
            if not any(math.isclose(r, a) for a in ALLOWED_RATIOS):
                raise ValueError(f"aspect ratio {r} not in {{1, 2, 3, 1/2, 1/3}}")

    @property
    def boxes_per_cell(self) -> int:
        return len(self.aspect_ratios) + int(self.include_extra)

    def cell_shapes(self) -> np.ndarray:
        """(k, 2) array of (w, h) for the boxes of one cell, in canonical order."""
        shapes = []
        extra = math.sqrt(self.scale * self.next_scale)
        for r in self.aspect_ratios:
            shapes.append((self.scale * math.sqrt(r), self.scale / math.sqrt(r)))
            if self.include_extra and r == 1.0:
                shapes.append((extra, extra))
        if self.include_extra and 1.0 not in self.aspect_ratios:
            shapes.append((extra, extra))
        return np.array(shapes, dtype=np.float64)


@dataclass
class PriorSet:
    """Ordered default boxes.

    Attributes:
        boxes: (P, 4) center-form boxes.
        layer_of: (P,) source layer index of each prior.
        cell: (P, 2) feature-map cell (i, j) of each prior.
    """

    boxes: np.ndarray
    layer_of: np.ndarray
    cell: np.ndarray
    specs: tuple[LayerSpec, ...] = field(default=())

    @property
    def total(self) -> int:
        return len(self.boxes)

    def __len__(self) -> int:
        return len(self.boxes)

    @property
    def corners(self) -> np.ndarray:
        return center_to_corner(self.boxes)

    def subset(self, index: np.ndarray) -> "PriorSet":
        return PriorSet(self.boxes[index], self.layer_of[index], self.cell[index], self.specs)


def layer_scales(m: int, s_min: float = 0.2, s_max: float = 0.9) -> list[float]:
    """Regularly spaced scales from ``s_min`` (lowest layer) to ``s_max`` (highest)."""
    if m < 2:
        raise ValueError(f"need at least 2 layers to space scales, got m={m}")
    if not 0 < s_min < s_max <= 1:
        raise ValueError(f"need 0 < s_min < s_max <= 1, got {s_min}, {s_max}")
    return [s_min + (s_max - s_min) * (k - 1) / (m - 1) for k in range(1, m + 1)]


def layer_priors(spec: LayerSpec) -> np.ndarray:
    """(f*f*k, 4) center-form priors of one layer, row-major over cells. Not clipped."""
    f = spec.grid_size
    shapes = spec.cell_shapes()
    k = len(shapes)
    centers = (np.arange(f, dtype=np.float64) + 0.5) / f
    cy, cx = np.meshgrid(centers, centers, indexing="ij")
    out = np.empty((f, f, k, 4))
    out[..., 0] = cx[..., None]
    out[..., 1] = cy[..., None]
    out[..., 2] = shapes[:, 0]
    out[..., 3] = shapes[:, 1]
    return out.reshape(-1, 4)


def build_priors(specs: Sequence[LayerSpec]) -> PriorSet:
    if not specs:
        raise ValueError("need at least one LayerSpec")
    boxes, layers, cells = [], [], []
    for idx, spec in enumerate(specs):
        f, k = spec.grid_size, spec.boxes_per_cell
        boxes.append(layer_priors(spec))
        layers.append(np.full(f * f * k, idx, dtype=np.int64))
        ii, jj = np.meshgrid(np.arange(f), np.arange(f), indexing="ij")
        cell = np.stack([ii, jj], axis=-1).reshape(-1, 1, 2)
        cells.append(np.repeat(cell, k, axis=1).reshape(-1, 2))
    return PriorSet(
        np.concatenate(boxes), np.concatenate(layers), np.concatenate(cells), tuple(specs)
    )


def expected_count(specs: Sequence[LayerSpec]) -> int:
    return sum(s.grid_size**2 * s.boxes_per_cell for s in specs)


def boundary_filter(priors: PriorSet, eps: float = 1e-9) -> tuple[PriorSet, np.ndarray]:
    """Drop priors that cross the image border.

    Returns:
        The retained priors and, for each retained prior, its index in ``priors``.
    """
    c = priors.corners
    inside = np.all((c >= -eps) & (c <= 1 + eps), axis=1)
    index = np.flatnonzero(inside)
    return priors.subset(index), index


def make_specs(
    grid_sizes: Sequence[int],
    aspect_ratios: Sequence[Sequence[float]],
    s_min: float = 0.2,
    s_max: float = 0.9,
    first_scale: float | None = None,
    include_extra: bool = True,
    last_next_scale: float = 1.0,
) -> list[LayerSpec]:
    """
    Layer specs with scales spaced between ``s_min`` and ``s_max``.

    When ``first_scale`` is given, the first layer takes that scale and the
    regular spacing covers the remaining layers only.
    """
    n = len(grid_sizes)
    if len(aspect_ratios) != n:
        raise ValueError("one aspect-ratio list per grid size is required")
    if first_scale is None:
        scales = layer_scales(n, s_min, s_max)
    elif n == 1:
        scales = [first_scale]
    elif n == 2:
        scales = [first_scale, s_max]
    else:
        scales = [first_scale] + layer_scales(n - 1, s_min, s_max)
    nxt = scales[1:] + [last_next_scale]
    return [
        LayerSpec(g, s, ns, tuple(r), include_extra)
        for g, s, ns, r in zip(grid_sizes, scales, nxt, aspect_ratios)
    ]


FOUR = (1.0, 2.0, 1 / 2)
SIX = (1.0, 2.0, 1 / 2, 3.0, 1 / 3)


def ssd300_specs() -> list[LayerSpec]:
    return make_specs(
        (38, 19, 10, 5, 3, 1), (FOUR, SIX, SIX, SIX, FOUR, FOUR), 0.2, 0.9, first_scale=0.1
    )


def ssd512_specs() -> list[LayerSpec]:
    # Grid sizes reconstructed to reproduce the published 24564 box count.
    return make_specs(
        (64, 32, 16, 8, 4, 2, 1),
        (FOUR, SIX, SIX, SIX, SIX, FOUR, FOUR),
        0.15,
        0.9,
        first_scale=0.07,
    )


def toy_specs(head_grids=(8, 4, 2, 1), s_min: float = 0.2, s_max: float = 0.9) -> list[LayerSpec]:
    """Four boxes per cell on every layer, for the small trainable detector."""
    return make_specs(head_grids, [FOUR] * len(head_grids), s_min, s_max)


def write_csv(priors: PriorSet, fh) -> None:
    fh.write("layer,cell_i,cell_j,cx,cy,w,h\n")
    for layer, (i, j), box in zip(priors.layer_of.tolist(), priors.cell.tolist(), priors.boxes.tolist()):
        fh.write(f"{layer},{i},{j}," + ",".join(repr(v) for v in box) + "\n")


def read_csv(fh) -> PriorSet:
    header = fh.readline().strip()
    if header != "layer,cell_i,cell_j,cx,cy,w,h":
        raise ValueError(f"unexpected priors CSV header: {header!r}")
    rows = [line.split(",") for line in fh if line.strip()]
    if not rows:
        raise ValueError("priors CSV has no rows")
    data = np.array(rows, dtype=np.float64)
    return PriorSet(data[:, 3:7], data[:, 0].astype(np.int64), data[:, 1:3].astype(np.int64))
