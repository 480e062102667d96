"""
Random projection scoring.

Every pass draws a zero-mean, unit-norm operator on the shape's support,
correlates it with the whole image and marks the origins whose projection
lies further than ``a`` standard deviations from zero.  Blocks that keep
landing in the tails across passes are the ones far from all others.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import fft as sfft

from .core import check_fits, greedy_disjoint

DIRECT_CROSSOVER = 64


@dataclass(frozen=True, eq=False)
class ProjectionOperator:
    shape: object
    values: np.ndarray
    seed: tuple

    @property
    def kernel(self):
        """Operator scattered back onto the shape's bounding box."""
        k = np.zeros(self.shape.mask.shape)
        k[self.shape.mask] = self.values
        return k


@dataclass(frozen=True, eq=False)
class ProjectionField:
    values: np.ndarray
    sigma: float


@dataclass
class ScoreMap:
    values: np.ndarray
    mode: str
    passes: int


@dataclass
class ScoringParams:
    """Parameters of the thresholded multi-pass scoring.

    ``a=None`` picks a default from the shape size, see :func:`default_a`.
    """

    M: int = 30
    a: float = None
    seed: int = 0
    mode: str = "count"
    normalize_by_block_dev: bool = False
    method: str = "auto"
    threads: int = 1

    def __post_init__(self):
        if self.M < 0:
            raise ValueError("M must be >= 0")
        if self.a is not None and self.a <= 0:
            raise ValueError("a must be > 0")
        if self.mode not in ("count", "smoothed"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    total: int
    moments: dict = field(default_factory=dict)

    @property
    def centers(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def log_prob(self):
        """Natural log of the empirical bin probability, ``-inf`` for empty bins."""
        with np.errstate(divide="ignore"):
            return np.log(self.counts / self.total)

    @property
    def excess_kurtosis(self):
        k = self.moments.get("excess_kurtosis")
        return float("nan") if k is None else k


def default_a(shape):
    """Threshold multiplier used when none is given.

    3 for sides up to 8, 12 from side 24 upward, linear in between.
    """
    side = shape.diameter
    if side <= 8:
        return 3.0
    if side >= 24:
        return 12.0
    return 3.0 + (side - 8) * (12.0 - 3.0) / 16.0


def pass_seed(master_seed, i):
    return (int(master_seed), int(i))


def sample_operator(shape, seed):
    """Uniform random direction on the unit sphere orthogonal to the constant vector."""
    if shape.support_size < 2:
        raise ValueError("operator needs a support of at least 2 pixels")
    base = tuple(seed) if isinstance(seed, (tuple, list)) else (int(seed),)
    attempt = 0
    while True:
        entropy = list(base) + ([attempt] if attempt else [])
        rng = np.random.default_rng(entropy)
        x = rng.standard_normal(shape.support_size)
        x -= x.mean()
        norm = np.sqrt(np.dot(x, x))
        if norm > 0:
            return ProjectionOperator(shape, x / norm, tuple(entropy))
        attempt += 1


def correlate_direct(image, kernel, mask=None):
    """``C[y, x] = sum K[j, i] * A[y + j, x + i]`` over the valid region."""
    image = np.asarray(image, dtype=np.float64)
    kh, kw = kernel.shape
    ny = image.shape[0] - kh + 1
    nx = image.shape[1] - kw + 1
    out = np.zeros((ny, nx))
    if mask is None:
        mask = kernel != 0
    for j, i in zip(*np.nonzero(mask)):
        out += kernel[j, i] * image[j:j + ny, i:i + nx]
    return out


# Transforms above this many points fall out of cache and cost more per point.
_CACHE_POINTS = 256 * 256
_CACHE_PENALTY = 1.6
_TILE_SIDES = (64, 96, 128, 160, 192, 256)


def _plan_axis(n, k):
    """Candidate (tile length, tile count) pairs for one axis of length ``n``."""
    full = sfft.next_fast_len(n, real=True)
    out = [(full, 1)]
    for p in _TILE_SIDES:
        if 2 * k <= p < full:
            step = p - k + 1
            out.append((p, -(-(n - k + 1) // step)))
    return out


def plan_tiles(image_shape, kernel_shape):
    """Pick the overlap-save tile size minimising a simple cache-aware cost."""
    (h, w), (kh, kw) = image_shape, kernel_shape
    best = None
    for py, ty in _plan_axis(h, kh):
        for px, tx in _plan_axis(w, kw):
            pts = py * px
            cost = ty * tx * pts * np.log2(pts) * (_CACHE_PENALTY if pts > _CACHE_POINTS else 1.0)
            if best is None or cost < best[0]:
                best = (cost, (py, px))
    return best[1]


class _Spectrum:
    """Overlap-save correlation against one image with cached tile spectra.

    The image is cut into overlapping tiles of size ``P``; each tile yields
    ``P - k + 1`` valid outputs per axis with no circular wrap-around, because
    ``r + rho`` stays inside the tile for every valid local origin ``r``.  A
    single tile covering the padded image is the plain FFT correlation.
    """

    def __init__(self, image, kernel_shape):
        self.image = np.asarray(image, dtype=np.float64)
        h, w = self.image.shape
        kh, kw = self.kshape = kernel_shape
        self.ny, self.nx = h - kh + 1, w - kw + 1
        self.size = py, px = plan_tiles((h, w), kernel_shape)
        self.step = sy, sx = py - kh + 1, px - kw + 1
        self.tiles = ty, tx = -(-self.ny // sy), -(-self.nx // sx)
        pad = np.zeros(((ty - 1) * sy + py, (tx - 1) * sx + px))
        pad[:h, :w] = self.image
        view = sliding_window_view(pad, (py, px))[::sy, ::sx][:ty, :tx]
        self.spec = sfft.rfft2(view, s=self.size)

    def correlate(self, kernel):
        if kernel.shape != self.kshape:
            raise ValueError("kernel shape differs from the planned one")
        kspec = np.conj(sfft.rfft2(kernel, s=self.size))
        (ty, tx), (sy, sx) = self.tiles, self.step
        out = np.empty((self.ny, self.nx))
        # one tile at a time keeps the inverse transform in cache
        for a in range(ty):
            for b in range(tx):
                dst = out[a * sy:(a + 1) * sy, b * sx:(b + 1) * sx]
                tile = sfft.irfft2(self.spec[a, b] * kspec, s=self.size)
                dst[...] = tile[:dst.shape[0], :dst.shape[1]]
        return out


def _choose_method(method, shape):
    if method == "auto":
        return "direct" if shape.support_size <= DIRECT_CROSSOVER else "fft"
    if method not in ("direct", "fft"):
        raise ValueError(f"unknown method {method!r}")
    return method


def noise_floor(image, shape):
    """Magnitude below which a projection is indistinguishable from rounding noise."""
    scale = float(np.abs(image).max()) if np.size(image) else 0.0
    return 64.0 * shape.support_size * np.finfo(np.float64).eps * scale


def _field(values, floor):
    # flat regions project to rounding noise, not to a signal
    values[np.abs(values) <= floor] = 0.0
    return ProjectionField(values, float(values.std()))


def project_all(image, op, method="auto"):
    """Project every valid block of ``image`` onto ``op``."""
    check_fits(image, op.shape)
    method = _choose_method(method, op.shape)
    if method == "direct":
        values = correlate_direct(image, op.kernel, op.shape.mask)
    else:
        values = _Spectrum(image, op.shape.mask.shape).correlate(op.kernel)
    return _field(values, noise_floor(np.asarray(image), op.shape))


class Projector:
    """Projects one image onto many operators, reusing the image spectrum."""

    def __init__(self, image, shape, method="auto"):
        self.image = np.asarray(image, dtype=np.float64)
        self.shape = shape
        check_fits(self.image, shape)
        self.method = _choose_method(method, shape)
        self._spectrum = _Spectrum(self.image, shape.mask.shape) if self.method == "fft" else None
        self.floor = noise_floor(self.image, shape)

    def correlate(self, kernel):
        if self._spectrum is None:
            return correlate_direct(self.image, kernel, self.shape.mask)
        return self._spectrum.correlate(kernel)

    def project(self, op):
        return _field(self.correlate(op.kernel), self.floor)

    def block_std(self):
        """Standard deviation of every block's values under the shape."""
        m = self.shape.mask.astype(np.float64)
        n = self.shape.support_size
        s1 = correlate_direct(self.image, m)
        s2 = correlate_direct(self.image ** 2, m)
        mean = s1 / n
        var = np.maximum(s2 / n - mean ** 2, 0.0)
        std = np.sqrt(var)
        # cancellation noise on flat blocks must read as exactly zero
        std[std <= 1e-7 * np.maximum(1.0, np.abs(mean))] = 0.0
        return std

    def fields(self, M, seed, threads=1):
        """Projection fields of passes ``0..M-1``, in pass order."""
        def one(i):
            return self.project(sample_operator(self.shape, pass_seed(seed, i)))
        if threads <= 1 or M <= 1:
            for i in range(M):
                yield one(i)
            return
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for start in range(0, M, threads):
                yield from pool.map(one, range(start, min(start + threads, M)))


def smoothed_penalty(x, sigma):
    """Per-pass penalty ``1/2 + x**2 / (2 sigma**2)`` of a projection value."""
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    return 0.5 + np.square(x) / (2.0 * sigma * sigma)


def _normalized(values, block_std):
    """Divide by block deviation; zero-deviation blocks become NaN (skipped)."""
    out = np.full_like(values, np.nan)
    ok = block_std > 0
    out[ok] = values[ok] / block_std[ok]
    sigma = float(out[ok].std()) if ok.any() else 0.0
    return out, sigma


def score_image(image, shape, params=None, fields_out=None):
    """Accumulate the per-origin rarity score over ``params.M`` passes.

    If ``fields_out`` is a list, the per-pass :class:`ProjectionField`s are
    appended to it (after block-deviation normalisation, when enabled).
    """
    params = params or ScoringParams()
    a = params.a if params.a is not None else default_a(shape)
    proj = Projector(image, shape, params.method)
    ny, nx = check_fits(proj.image, shape)
    block_std = proj.block_std() if params.normalize_by_block_dev else None

    if params.mode == "count":
        acc = np.zeros((ny, nx), dtype=np.int64)
    else:
        acc = np.zeros((ny, nx), dtype=np.float64)
    for fld in proj.fields(params.M, params.seed, params.threads):
        values, sigma = fld.values, fld.sigma
        if block_std is not None:
            values, sigma = _normalized(values, block_std)
            fld = ProjectionField(values, sigma)
        if fields_out is not None:
            fields_out.append(fld)
        valid = ~np.isnan(values)
        if params.mode == "count":
            if sigma > 0:
                with np.errstate(invalid="ignore"):
                    acc += valid & (np.abs(values) > a * sigma)
        else:
            acc += 0.5
            if sigma > 0:
                acc += np.where(valid, np.square(np.nan_to_num(values)) / (2.0 * sigma * sigma), 0.0)
    return ScoreMap(acc, params.mode, params.M)


def top_candidates(score_map, k, shape, rule="chebyshev"):
    """Greedy best-first list of ``k`` mutually disjoint high-score origins."""
    if k < 1:
        raise ValueError("k must be >= 1")
    values = score_map.values if isinstance(score_map, ScoreMap) else np.asarray(score_map)
    return greedy_disjoint(values, k, shape, rule)


def projection_histogram(image, shape, M, bins, seed=0, method="auto", threads=1):
    """Pooled histogram of the projection values of ``M`` random operators.

    The range is symmetric, ``+-max|C|`` over all pooled values.  The pooled
    mean, standard deviation and excess kurtosis are kept in ``moments``.
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    if M < 1:
        raise ValueError("M must be >= 1")
    proj = Projector(image, shape, method)
    # first sweep: range and moments; second sweep: binning
    stats = FieldStats()
    for fld in proj.fields(M, seed, threads):
        stats.append(fld)
    half = stats.max_abs if stats.max_abs > 0 else 1.0
    edges = np.linspace(-half, half, bins + 1)
    counts = np.zeros(bins, dtype=np.int64)
    for fld in proj.fields(M, seed, threads):
        counts += bin_counts(fld.values, half, bins)
    n = stats.count
    moments = stats.summary()
    return Histogram(edges, counts, int(n), moments)


class FieldStats:
    """Streaming moments of pooled projection values.

    Has an ``append`` method so it can stand in for the ``fields_out`` list of
    :func:`score_image` without keeping every field in memory.
    """

    def __init__(self):
        self.count = 0
        self.max_abs = 0.0
        self.sigmas = []
        self._power = np.zeros(5)

    def append(self, fld):
        v = fld.values[np.isfinite(fld.values)]
        self.sigmas.append(fld.sigma)
        if v.size == 0:
            return
        self.count += v.size
        self.max_abs = max(self.max_abs, float(np.abs(v).max()))
        for p in range(1, 5):
            self._power[p] += (v ** p).sum()

    def summary(self):
        if self.count == 0:
            return {"count": 0, "mean": None, "std": None, "excess_kurtosis": None}
        m1, m2, m3, m4 = self._power[1:] / self.count
        var = max(m2 - m1 ** 2, 0.0)
        c4 = m4 - 4 * m1 * m3 + 6 * m1 ** 2 * m2 - 3 * m1 ** 4
        kurt = c4 / var ** 2 - 3.0 if var > 1e-300 else None
        return {"count": int(self.count), "mean": float(m1), "std": float(np.sqrt(var)),
                "excess_kurtosis": None if kurt is None else float(kurt),
                "max_abs": float(self.max_abs)}


def bin_index(values, half, bins):
    """Bin of each value on ``bins`` equal bins over ``[-half, half]``; edges clip inward."""
    idx = np.floor((np.asarray(values) + half) / (2.0 * half) * bins).astype(np.int64)
    return np.clip(idx, 0, bins - 1)


def bin_counts(values, half, bins):
    return np.bincount(bin_index(values, half, bins).ravel(), minlength=bins)
