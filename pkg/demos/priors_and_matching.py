"""Tile default boxes over a toy image and see which ones a ground truth claims."""

import numpy as np

from tinyssd.matching import match
from tinyssd.priors import build_priors, layer_scales, ssd300_specs, toy_specs
from tinyssd.tinynet import synth_dataset

# Scales grow linearly from the finest to the coarsest prediction layer.
print("scales for 6 layers:", np.round(layer_scales(6, 0.2, 0.9), 2))

# The 300x300 layout: 38x38 down to 1x1 grids, 4 or 6 boxes per cell.
big = build_priors(ssd300_specs())
print("SSD300 priors:", big.total, "per layer:", np.bincount(big.layer_of).tolist())

# The toy detector uses four layers of four boxes each on a 64x64 input.
priors = build_priors(toy_specs())
print("toy priors:", priors.total)

sample = synth_dataset(seed=0, n_images=1)[0]
print("\nground truth (label, box):")
for label, box in zip(sample.labels, sample.boxes):
    print(" ", label, np.round(box, 3))

a = match(priors, sample.boxes, sample.labels)
print(f"\n{a.n_pos} positive priors, {int(a.bipartite.sum())} of them from the best-match phase")
for i in np.flatnonzero(a.labels):
    layer = priors.layer_of[i]
    print(f"  prior {i:3d} layer {layer} cell {tuple(priors.cell[i])} -> gt {a.gt_index[i]} "
          f"IoU {a.iou[i]:.2f} offsets {np.round(a.targets[i], 2)}")
