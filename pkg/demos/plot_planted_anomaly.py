"""
Finding a planted patch
=======================

A checkerboard is hidden in Gaussian noise.  Random zero-mean projections
flag the blocks whose values land in the tails, and the block flagged most
often is the odd one out.
"""

import numpy as np

from rarepatch import Shape, ScoringParams, generate, score_image, top_candidates
from rarepatch.synth import planted_spec

# a 64x64 noisy image with an 8x8 checker somewhere in it
img, truth = generate(planted_spec(seed=3))
print("plant at", truth)

shape = Shape.square(8)
smap = score_image(img, shape, ScoringParams(M=30, a=3, seed=0))

# each origin counts how many of the 30 projections put it past 3 sigma
print("max count", smap.values.max(), "of", smap.passes)
for (x, y), score in top_candidates(smap, 3, shape):
    print(f"  candidate ({x}, {y}) score {score}")

# the count map is a cheap saliency image
from rarepatch.imageio import write_heatmap
write_heatmap("planted_score.pgm", smap.values)
