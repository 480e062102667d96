"""
Exact search against random projections
=======================================

The exact answer compares every block with every non-overlapping block.
That is quartic in the image side.  The projection score only needs one
correlation per pass, so it scales like an FFT.  On small images both can be
run and compared.
"""

import time

import numpy as np

from rarepatch import Shape, ScoringParams, generate, nn_distance_map, score_image
from rarepatch.oracle import argmax_origin
from rarepatch.synth import planted_spec

shape = Shape.square(8)

for seed in range(5):
    img, truth = generate(planted_spec(seed))

    t0 = time.perf_counter()
    dmap = nn_distance_map(img, shape)
    t_exact = time.perf_counter() - t0
    exact, d = argmax_origin(dmap)

    t0 = time.perf_counter()
    smap = score_image(img, shape, ScoringParams(M=30, a=3)).values
    t_proj = time.perf_counter() - t0
    y, x = np.unravel_index(np.argmax(smap), smap.shape)

    print(f"seed {seed}: plant {truth}  exact {exact} ({t_exact:.2f}s)  "
          f"projections {(int(x), int(y))} ({t_proj:.3f}s)")
