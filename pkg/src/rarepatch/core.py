"""
Shared geometry: shapes, block extraction, block distances and the
separation rule that decides when two placements of a shape may be compared.

Images are plain 2-D float arrays indexed ``[y, x]``.  Origins are ``(x, y)``
tuples addressing the top-left corner of the shape's bounding box.
"""

from dataclasses import dataclass, field

import numpy as np

SEPARATION_RULES = ("chebyshev", "euclidean")
NORMS = ("l2", "l1")


def as_image(data):
    """Validate and convert ``data`` to a 2-D float64 image array."""
    img = np.asarray(data, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"image must be 2-D, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError("image must have at least one pixel")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite intensities")
    return img


@dataclass(frozen=True, eq=False)
class Shape:
    """Binary mask over a tight bounding box.

    The support pixels, in row-major order over the mask, define the
    canonical ordering of every block and projection operator.
    """

    mask: np.ndarray
    offsets: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mask = np.asarray(self.mask).astype(bool)
        if mask.ndim != 2:
            raise ValueError("shape mask must be 2-D")
        if mask.sum() < 2:
            raise ValueError(
                f"shape support must contain at least 2 pixels, got {int(mask.sum())}")
        rows = np.flatnonzero(mask.any(axis=1))
        cols = np.flatnonzero(mask.any(axis=0))
        if rows[0] != 0 or rows[-1] != mask.shape[0] - 1 \
                or cols[0] != 0 or cols[-1] != mask.shape[1] - 1:
            raise ValueError("shape mask bounding box is not tight; use Shape.from_mask")
        mask = mask.copy()
        mask.flags.writeable = False
        object.__setattr__(self, "mask", mask)
        ys, xs = np.nonzero(mask)
        offsets = np.stack([ys, xs], axis=1)
        offsets.flags.writeable = False
        object.__setattr__(self, "offsets", offsets)

    @classmethod
    def square(cls, side):
        return cls.rectangle(side, side)

    @classmethod
    def rectangle(cls, width, height):
        return cls(np.ones((height, width), dtype=bool))

    @classmethod
    def from_mask(cls, mask):
        """Build a shape from any mask, cropping it to its bounding box."""
        mask = np.asarray(mask) != 0
        if not mask.any():
            raise ValueError("mask has no support pixels")
        rows = np.flatnonzero(mask.any(axis=1))
        cols = np.flatnonzero(mask.any(axis=0))
        return cls(mask[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1])

    @property
    def width(self):
        return self.mask.shape[1]

    @property
    def height(self):
        return self.mask.shape[0]

    @property
    def support_size(self):
        return len(self.offsets)

    @property
    def is_full(self):
        return self.support_size == self.width * self.height

    @property
    def diameter(self):
        """Side of the bounding box (the L-infinity extent used for separation)."""
        return max(self.width, self.height)

    @property
    def euclidean_diameter_sq(self):
        """Squared largest distance between two support pixel centres (exact integer)."""
        # the leftmost and rightmost pixel of every row contain the convex hull
        ys, xs = self.offsets[:, 0], self.offsets[:, 1]
        pts = []
        for y in np.unique(ys):
            row = xs[ys == y]
            pts.append((y, row.min()))
            pts.append((y, row.max()))
        pts = np.asarray(pts, dtype=np.int64)
        diff = pts[:, None, :] - pts[None, :, :]
        return int((diff ** 2).sum(-1).max())

    @property
    def euclidean_diameter(self):
        """Largest distance between two support pixel centres."""
        return float(np.sqrt(self.euclidean_diameter_sq))

    def __eq__(self, other):
        return isinstance(other, Shape) and np.array_equal(self.mask, other.mask)

    def __hash__(self):
        return hash((self.mask.shape, self.mask.tobytes()))


def origin_grid(image, shape):
    """Return ``(ny, nx)``, the number of valid origin rows and columns.

    Either count is zero when the shape does not fit inside the image.
    """
    h, w = np.shape(image)
    return max(h - shape.height + 1, 0), max(w - shape.width + 1, 0)


def check_fits(image, shape):
    ny, nx = origin_grid(image, shape)
    if ny == 0 or nx == 0:
        h, w = np.shape(image)
        raise ValueError(
            f"shape {shape.width}x{shape.height} does not fit in image {w}x{h}")
    return ny, nx


def cut_block(image, shape, r):
    """Values of ``image`` under ``shape`` placed at origin ``r = (x, y)``."""
    x, y = r
    ny, nx = origin_grid(image, shape)
    if not (0 <= x < nx and 0 <= y < ny):
        raise ValueError(
            f"origin ({x}, {y}) outside valid region "
            f"0 <= x <= {nx - 1}, 0 <= y <= {ny - 1}")
    window = np.asarray(image)[y:y + shape.height, x:x + shape.width]
    return window[shape.mask].astype(np.float64)


def block_distance(b1, b2, norm="l2"):
    b1 = np.asarray(b1, dtype=np.float64)
    b2 = np.asarray(b2, dtype=np.float64)
    if b1.shape != b2.shape:
        raise ValueError(f"block length mismatch: {b1.shape} vs {b2.shape}")
    diff = b1 - b2
    if norm == "l2":
        return float(np.sqrt(np.dot(diff, diff)))
    if norm == "l1":
        return float(np.abs(diff).sum())
    raise ValueError(f"unknown norm {norm!r}; expected one of {NORMS}")


def origins_disjoint(r, r2, shape, rule="chebyshev"):
    """Whether placements at ``r`` and ``r2`` are far enough apart to compare.

    ``"chebyshev"`` requires an L-infinity offset of at least the bounding-box
    side, which is exact for full rectangles of equal sides and conservative
    otherwise.  ``"euclidean"`` requires the Euclidean offset to exceed the
    Euclidean diameter of the support.
    """
    dx = abs(r[0] - r2[0])
    dy = abs(r[1] - r2[1])
    if rule == "chebyshev":
        return max(dx, dy) >= shape.diameter
    if rule == "euclidean":
        return dx * dx + dy * dy > shape.euclidean_diameter_sq
    raise ValueError(f"unknown separation rule {rule!r}")


def disjoint_mask(dx, dy, shape, rule="chebyshev"):
    """Vectorised :func:`origins_disjoint` over integer offset arrays."""
    dx = np.abs(dx)
    dy = np.abs(dy)
    if rule == "chebyshev":
        return np.maximum(dx, dy) >= shape.diameter
    if rule == "euclidean":
        return dx * dx + dy * dy > shape.euclidean_diameter_sq
    raise ValueError(f"unknown separation rule {rule!r}")


def greedy_disjoint(values, k, shape, rule="chebyshev", candidates=None):
    """Pick up to ``k`` highest entries of a per-origin map with disjoint placements.

    Ties go to the row-major earlier origin.  ``candidates`` optionally
    restricts the flat indices considered.  Returns ``[((x, y), value), ...]``.
    """
    values = np.asarray(values)
    nx = values.shape[1]
    flat = values.ravel()
    if candidates is None:
        candidates = np.arange(flat.size)
    candidates = np.asarray(candidates)
    order = candidates[np.argsort(-flat[candidates], kind="stable")]
    picked = []
    for idx in order:
        if len(picked) >= k:
            break
        r = (int(idx % nx), int(idx // nx))
        if all(origins_disjoint(r, p, shape, rule) for p, _ in picked):
            picked.append((r, flat[idx].item()))
    return picked
