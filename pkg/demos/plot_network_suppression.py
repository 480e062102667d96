"""
Repeated structures suppress each other
=======================================

A block can be rare globally yet appear twice.  The recurrent network links
distant blocks that project to nearly the same large value, so such pairs
inhibit each other.  A unique block keeps its drive.
"""

import numpy as np

from rarepatch import NetworkParams, Shape, ScoringParams, run_network, score_image

rng = np.random.default_rng(0)
img = np.clip(rng.normal(0.5, 0.05, (64, 96)), 0, 1)
patch = rng.uniform(0, 1, (8, 8))

# two copies of one patch, and one inverted copy with the same projection sizes
places = {"twin1": (8, 8), "twin2": (72, 44), "single": (40, 28)}
for name, (x, y) in places.items():
    img[y:y + 8, x:x + 8] = 1 - patch if name == "single" else patch

shape = Shape.square(8)
fields = []
score = score_image(img, shape, ScoringParams(M=30, a=3, seed=0), fields_out=fields)

params = NetworkParams(a=3, beta=0.05, delta=0.01, max_pairs_per_origin=None)
res = run_network(img, shape, fields, params)
print(f"status {res.status} after {res.iterations} steps, "
      f"{len(res.weights)} couplings, active fraction {res.active_fraction:.3f}")

for name, (x, y) in places.items():
    print(f"{name:7s} count {score.values[y, x]:2d}  activity {res.activity[y, x]:.3f}")
