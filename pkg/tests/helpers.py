"""Independent reference implementations and instance builders for the tests."""

import math

import numba
import numpy as np

from rarepatch.synth import generate, planted_spec


@numba.njit(cache=True)
def _naive_kernel(img, mask, side, l1):
    h, w = img.shape
    mh, mw = mask.shape
    ny, nx = h - mh + 1, w - mw + 1
    out = np.full((ny, nx), np.nan)
    for y in range(ny):
        for x in range(nx):
            best = np.inf
            found = False
            for y2 in range(ny):
                for x2 in range(nx):
                    if max(abs(x - x2), abs(y - y2)) < side:
                        continue
                    s = 0.0
                    for j in range(mh):
                        for i in range(mw):
                            if mask[j, i]:
                                d = img[y2 + j, x2 + i] - img[y + j, x + i]
                                if l1:
                                    s += abs(d)
                                else:
                                    s += d * d
                    found = True
                    if s < best:
                        best = s
            if found:
                out[y, x] = best if l1 else math.sqrt(best)
    return out


def naive_distance_map(image, shape, norm="l2"):
    """Literal quadruple loop over origin pairs (Chebyshev separation)."""
    return _naive_kernel(np.ascontiguousarray(image, dtype=np.float64),
                         np.ascontiguousarray(shape.mask), shape.diameter, norm == "l1")


def chebyshev(r, q):
    return max(abs(r[0] - q[0]), abs(r[1] - q[1]))


def planted(seed):
    """Acceptance instance: 64x64 gaussian background, 8x8 checker plant."""
    return generate(planted_spec(seed))


TWIN_ORIGINS = {"twin1": (8, 8), "twin2": (72, 44), "single": (40, 28)}


def three_patch(seed=0, sd=0.05):
    """Two identical random patches and one inverted copy on a noisy background.

    The inverted copy projects to exactly minus the twins' values under any
    zero-mean operator, so all three carry equal projection magnitudes.
    """
    rng = np.random.default_rng(seed)
    img = np.clip(rng.normal(0.5, sd, (64, 96)), 0, 1)
    patch = rng.uniform(0, 1, (8, 8))
    for name, (x, y) in TWIN_ORIGINS.items():
        img[y:y + 8, x:x + 8] = 1 - patch if name == "single" else patch
    return img
