"""Train the toy detector briefly, then look at its detections and mAP.

The acceptance recipe (configs/toy.yaml) runs 5000 iterations. Here the
default is 2000, enough to leave the initial loss plateau. It takes about
five minutes on one core and reaches an mAP near 0.6.

Usage: python train_and_evaluate.py [iterations]
"""

import sys
import time
from pathlib import Path

import numpy as np

from tinyssd import config
from tinyssd.tinynet import CLASSES, evaluate_model, predict, synth_dataset, train

cfg = config.load(Path(__file__).resolve().parents[1] / "configs" / "toy.yaml")
cfg.train.iterations = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
cfg.train.lr_steps = (int(cfg.train.iterations * 0.7), int(cfg.train.iterations * 0.9))

train_set = synth_dataset(cfg.data.train_seed, cfg.data.train_images)
test_set = synth_dataset(cfg.data.test_seed, 200)

start = time.perf_counter()
res = train(cfg.model, cfg.specs(), train_set, cfg.train, cfg.augment)
print(f"trained {cfg.train.iterations} iterations in {time.perf_counter() - start:.0f}s")
window = max(1, cfg.train.iterations // 10)
print("loss per tenth:", [round(float(np.median(res.losses[i:i + window])), 3)
                          for i in range(0, cfg.train.iterations, window)])

labels, scores, boxes = predict(res.model, test_set[:1], cfg.specs(), cfg.inference)[0]
print("\nimage 0 ground truth:")
for l, b in zip(test_set[0].labels, test_set[0].boxes):
    print(f"  {CLASSES[l - 1]:9s} {np.round(b, 2)}")
print("top detections:")
for l, s, b in list(zip(labels, scores, boxes))[:5]:
    print(f"  {CLASSES[l - 1]:9s} {s:.2f} {np.round(b, 2)}")

aps, m = evaluate_model(res.model, test_set, cfg.specs(), cfg.inference, cfg.eval)
print("\nAP per class:", {CLASSES[c - 1]: round(ap, 3) for c, ap in aps.items()}, f"mAP {m:.3f}")
