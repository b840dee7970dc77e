"""Draw augmented views of one synthetic image and save them side by side.

Usage: python augmentation.py [out.png]
"""

import sys

import cv2
import numpy as np

from tinyssd.augment import AugmentConfig, augment_pipeline, sample_patch, sample_rng
from tinyssd.tinynet import synth_dataset

out_path = sys.argv[1] if len(sys.argv) > 1 else "augmented.png"
cfg = AugmentConfig()
sample = synth_dataset(seed=2, n_images=1)[0]

# Which crop option each draw picked, and how many tries it needed.
for i in range(8):
    _, p = sample_patch(sample, cfg, sample_rng(0, 0, i), return_param=True)
    print(f"draw {i}: option {p['option']!s:>6}  patch {np.round(p['patch'], 2)}  attempts {p['attempts']}")

tiles = []
for i in range(8):
    s = augment_pipeline(sample, cfg, sample_rng(0, 0, i), size=128)
    img = np.ascontiguousarray((s.pixels * 255).astype(np.uint8)[..., ::-1])
    for box in s.boxes:
        x0, y0, x1, y1 = (box * 128).astype(int)
        cv2.rectangle(img, (x0, y0), (x1, y1), (0, 255, 0), 1)
    tiles.append(img)
cv2.imwrite(out_path, np.concatenate(tiles, axis=1))
print("wrote", out_path)
