"""
Heavy tails of projections on a natural image
=============================================

Projections of natural image blocks onto random zero-mean operators are not
Gaussian.  Most blocks are smooth and project near zero, while a few edges
project far out.  The excess kurtosis measures that.
"""

import numpy as np

from rarepatch import Shape, projection_histogram, sample_image

img = sample_image()
h = projection_histogram(img, Shape.square(48), M=30, bins=101, seed=0)

print("values pooled:", h.total)
print("excess kurtosis: %.3f  (0 for a Gaussian)" % h.excess_kurtosis)

# crude text plot of log10 probability
logp = np.log10(np.maximum(h.counts, 1) / h.total)
for c, lp in list(zip(h.centers, logp))[::5]:
    print(f"{c:+8.3f} " + "#" * int(max(0, 8 + lp) * 4))

# a gaussian field of the same size for contrast
rng = np.random.default_rng(0)
g = projection_histogram(rng.normal(size=img.shape), Shape.square(48), M=30, bins=101)
print("gaussian noise kurtosis: %.3f" % g.excess_kurtosis)
