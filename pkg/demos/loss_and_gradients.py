"""The multibox objective on a small random problem, and a gradient check of the whole network."""

import numpy as np

from tinyssd.gradcheck import finite_difference, max_rel_error, net_gradcheck, random_loss_instance
from tinyssd.loss import multibox_loss

rng = np.random.default_rng(0)
conf, loc, assignment = random_loss_instance(rng, num_priors=24, num_classes=3, pos_prob=0.15)

r = multibox_loss(conf, loc, assignment)
print(f"positives N = {r.n_pos}, hard negatives kept = {len(r.selected_negatives)} (at most 3N)")
print(f"confidence loss {r.l_conf:.4f}, localization loss {r.l_loc:.4f}, total (L_conf + L_loc) / N = {r.total:.4f}")

# Only positives and the mined negatives receive a confidence gradient.
touched = np.flatnonzero(np.abs(r.grad_conf).sum(axis=1))
print("rows with confidence gradient:", touched.tolist())

numeric = finite_difference(lambda c: multibox_loss(c, loc, assignment).total, conf)
print(f"loss gradient vs central differences: max rel err {max_rel_error(r.grad_conf, numeric):.2e}")

# Same check through every conv, pool and head parameter of a 16x16 network.
print(f"network gradient check: max rel err {net_gradcheck(np.random.default_rng(1)):.2e}")
