"""
Exact nearest-disjoint-neighbour search.

For every origin the distance to the closest block whose placement does not
intersect it is computed exhaustively; the origin maximising that distance is
the rarest block.  Cost grows with the square of the number of origins, so
this is the slow, trustworthy reference for the projection method.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import NORMS, check_fits, disjoint_mask, greedy_disjoint


@dataclass
class DistanceMap:
    """Per-origin distance to the nearest disjoint block.

    Origins with no disjoint partner at all hold NaN.
    """

    values: np.ndarray
    norm: str
    shape: object
    rule: str = "chebyshev"


def _blocks(image, shape):
    ny, nx = check_fits(image, shape)
    cols = [image[j:j + ny, i:i + nx].ravel() for j, i in shape.offsets]
    return np.stack(cols, axis=1), ny, nx


def _exact(blocks, i, j, norm):
    """Distances of pairs ``(i[k], j[k])``, summed sequentially over the support."""
    acc = np.zeros(len(i))
    buf = np.empty(len(i))
    for p in range(blocks.shape[1]):
        np.subtract(blocks[j, p], blocks[i, p], out=buf)
        if norm == "l2":
            np.multiply(buf, buf, out=buf)
        else:
            np.abs(buf, out=buf)
        acc += buf
    return acc


def _dense(blocks, rows, norm):
    """Distances from ``rows`` to every block, summed sequentially over the support."""
    acc = np.zeros((len(rows), blocks.shape[0]))
    buf = np.empty_like(acc)
    for p in range(blocks.shape[1]):
        np.subtract(blocks[None, :, p], blocks[rows, p, None], out=buf)
        if norm == "l2":
            np.multiply(buf, buf, out=buf)
        else:
            np.abs(buf, out=buf)
        acc += buf
    return acc


def _row_minima(blocks, sq, ox, oy, shape, norm, rule, start, stop):
    """Minimum disjoint distance for origins ``start..stop-1``.

    Every distance is a sequential sum over the support in canonical order.
    For L2, a Gram-matrix screen with a rigorous rounding bound first discards
    pairs that cannot attain the minimum.
    """
    rows = np.arange(start, stop)
    ok = disjoint_mask(ox[None, :] - ox[rows, None],
                       oy[None, :] - oy[rows, None], shape, rule)
    keep = ok
    if norm == "l2":
        approx = sq[rows, None] + sq[None, :] - 2.0 * (blocks[rows] @ blocks.T)
        approx[~ok] = np.inf
        k = blocks.shape[1]
        eps = 32.0 * k * np.finfo(float).eps * (sq[rows, None] + sq.max() + 1.0)
        keep = ok & (approx <= approx.min(axis=1, keepdims=True) + 2.0 * eps)
    ci, cj = np.nonzero(keep)
    if len(ci) <= 16 * len(rows):
        best = np.full(len(rows), np.inf)
        np.minimum.at(best, ci, _exact(blocks, rows[ci], cj, norm))
    else:
        # screen too weak (flat or repetitive images): evaluate every pair
        acc = _dense(blocks, rows, norm)
        acc[~keep] = np.inf
        best = acc.min(axis=1)
    if norm == "l2":
        best = np.sqrt(best)
    best[~ok.any(axis=1)] = np.nan
    return best


def nn_distance_map(image, shape, norm="l2", rule="chebyshev", threads=1, chunk=128):
    """Distance from each block to its nearest non-intersecting block."""
    if norm not in NORMS:
        raise ValueError(f"unknown norm {norm!r}; expected one of {NORMS}")
    image = np.asarray(image, dtype=np.float64)
    blocks, ny, nx = _blocks(image, shape)
    sq = np.einsum("ij,ij->i", blocks, blocks)
    n = ny * nx
    oy, ox = np.divmod(np.arange(n), nx)
    out = np.empty(n)
    spans = [(s, min(s + chunk, n)) for s in range(0, n, chunk)]

    def work(span):
        out[span[0]:span[1]] = _row_minima(blocks, sq, ox, oy, shape, norm, rule, *span)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, spans))
    else:
        for span in spans:
            work(span)
    if np.isnan(out).all():
        raise ValueError(
            f"no two disjoint placements of a {shape.width}x{shape.height} shape "
            f"fit in a {image.shape[1]}x{image.shape[0]} image")
    return DistanceMap(out.reshape(ny, nx), norm, shape, rule)


def rarest_block(image, shape, norm="l2", rule="chebyshev", threads=1):
    """Origin ``(x, y)`` whose nearest disjoint block is farthest, and that distance."""
    dmap = nn_distance_map(image, shape, norm, rule, threads)
    return argmax_origin(dmap)


def argmax_origin(dmap):
    values = np.where(np.isnan(dmap.values), -np.inf, dmap.values)
    idx = int(np.argmax(values))
    nx = values.shape[1]
    return (idx % nx, idx // nx), float(values.flat[idx])


def distance_outliers(dmap, z=3.0):
    """Disjoint origins whose distance exceeds ``mean + z * std`` of the map.

    Returns ``[((x, y), d, z_score), ...]`` sorted by ``d`` descending.
    """
    flat = dmap.values.ravel()
    finite = np.flatnonzero(np.isfinite(flat))
    if finite.size == 0:
        raise ValueError("distance map is empty")
    mean = flat[finite].mean()
    std = flat[finite].std()
    if std == 0:
        return []
    above = finite[flat[finite] > mean + z * std]
    picked = greedy_disjoint(dmap.values, len(above), dmap.shape, dmap.rule, candidates=above)
    return [(r, d, (d - mean) / std) for r, d in picked]
