"""
Context-relative refinement with a sparse recurrent network.

One neuron per origin.  A neuron is driven by the summed surprisal of its
projection values (external field) and inhibited by distant origins whose
projections are large, of the same sign and close in value.  Repeated
structures therefore suppress each other while a unique rare block keeps its
drive.  The global threshold is tuned so that only a small fraction of the
neurons stays active.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.special import expit

from .core import disjoint_mask
from .projection import bin_counts, bin_index, default_a

N_BINS = 257


@dataclass
class NetworkParams:
    h0: float = None          # None: balance positive and negative flux
    delta: float = np.inf
    a: float = None           # None: same default as scoring
    beta: float = 0.05
    target_fraction: float = 0.02
    max_iters: int = 50
    tol: float = 1e-4
    bisect_iters: int = 40
    max_pairs_per_origin: int = 64   # None disables the cap
    activation: str = "logistic"
    rule: str = "chebyshev"

    def __post_init__(self):
        if self.h0 is not None and self.h0 <= 0:
            raise ValueError("h0 must be > 0")
        if self.beta <= 0:
            raise ValueError("beta must be > 0")
        if not 0 < self.target_fraction < 1:
            raise ValueError("target_fraction must lie in (0, 1)")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class LogProbTable:
    """Binned empirical log-probability of one pass's projection values."""

    half: float
    log_p: np.ndarray
    floor: float

    @classmethod
    def from_values(cls, values, bins=N_BINS):
        values = np.asarray(values)
        vmax = float(np.abs(values).max()) if values.size else 0.0
        half = vmax if vmax > 0 else 1.0
        counts = bin_counts(values, half, bins)
        total = counts.sum()
        floor = float(np.log(0.5 / total))
        with np.errstate(divide="ignore"):
            log_p = np.where(counts > 0, np.log(counts / total), floor)
        return cls(half, log_p, floor)

    def __call__(self, values):
        return self.log_p[bin_index(values, self.half, len(self.log_p))]


@dataclass
class SparseWeights:
    """Symmetric non-positive couplings, one entry per unordered pair ``i < j``.

    Neuron indices are row-major flat origin indices.
    """

    n: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    @classmethod
    def empty(cls, n):
        z = np.zeros(0, dtype=np.int64)
        return cls(n, z, z.copy(), z.copy())

    def __len__(self):
        return len(self.values)

    def matrix(self):
        """Full symmetric CSR matrix."""
        r = np.concatenate([self.rows, self.cols])
        c = np.concatenate([self.cols, self.rows])
        v = np.concatenate([self.values, self.values]).astype(np.float64)
        return sparse.csr_matrix((v, (r, c)), shape=(self.n, self.n))

    def row_sums(self):
        out = np.zeros(self.n)
        np.add.at(out, self.rows, self.values)
        np.add.at(out, self.cols, self.values)
        return out

    def get(self, i, j):
        i, j = min(i, j), max(i, j)
        hit = np.flatnonzero((self.rows == i) & (self.cols == j))
        return int(self.values[hit[0]]) if hit.size else 0


@dataclass
class NetworkResult:
    activity: np.ndarray
    h: np.ndarray
    weights: SparseWeights
    h0: float
    T: float
    status: str
    iterations: int
    calibration: dict = field(default_factory=dict)

    @property
    def active_fraction(self):
        return float((self.activity > 0.5).mean())


def _tanh_activation(u):
    return 0.5 * (1.0 + np.tanh(u))


ACTIVATIONS = {"logistic": expit, "tanh": _tanh_activation}


def log_prob_tables(fields, bins=N_BINS):
    return [LogProbTable.from_values(f.values, bins) for f in fields]


def build_external_field(fields, tables, h0=1.0):
    """Summed surprisal ``-h0 * sum_i log p_i(C_i(r))`` per origin."""
    if len(fields) != len(tables):
        raise ValueError(f"{len(fields)} fields but {len(tables)} tables")
    if not fields:
        raise ValueError("need at least one projection field")
    h = np.zeros(fields[0].values.shape)
    for f, t in zip(fields, tables):
        h -= t(f.values)
    return h0 * h


def _pass_pairs(values, sigma, a, delta, ox, oy, shape, rule):
    """Flat (i, j), i < j, of disjoint origin pairs coupled in one pass."""
    flat = values.ravel()
    if not sigma > 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    with np.errstate(invalid="ignore"):
        q = np.flatnonzero(np.abs(flat) > a * sigma)
    if q.size < 2:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    iu, ju = np.triu_indices(q.size, k=1)
    i, j = q[iu], q[ju]
    x, y = flat[i], flat[j]
    keep = (x * y > 0) & disjoint_mask(ox[i] - ox[j], oy[i] - oy[j], shape, rule)
    if np.isfinite(delta):
        keep &= np.abs(x - y) < delta
    return i[keep], j[keep]


def build_weights(fields, shape, params=None):
    """Count, for every disjoint origin pair, the passes coupling them; store as negatives."""
    params = params or NetworkParams()
    a = params.a if params.a is not None else default_a(shape)
    ny, nx = fields[0].values.shape
    n = ny * nx
    oy, ox = np.divmod(np.arange(n), nx)
    keys = []
    for f in fields:
        if f.values.shape != (ny, nx):
            raise ValueError("fields do not share one origin region")
        i, j = _pass_pairs(f.values, f.sigma, a, params.delta, ox, oy, shape, params.rule)
        keys.append(i * n + j)
    if not keys or sum(len(k) for k in keys) == 0:
        return SparseWeights.empty(n)
    uniq, counts = np.unique(np.concatenate(keys), return_counts=True)
    w = SparseWeights(n, uniq // n, uniq % n, -counts.astype(np.int64))
    if params.max_pairs_per_origin is not None:
        w = cap_weights(w, params.max_pairs_per_origin)
    return w


def cap_weights(w, cap):
    """Keep a pair only if it is among the ``cap`` strongest of both endpoints.

    Strength ties are broken by the partner's index.
    """
    if len(w) == 0:
        return w
    ends = np.concatenate([w.rows, w.cols])
    partners = np.concatenate([w.cols, w.rows])
    strength = np.concatenate([w.values, w.values])
    order = np.lexsort((partners, strength, ends))
    ends_s = ends[order]
    start = np.searchsorted(ends_s, ends_s, side="left")
    rank = np.arange(len(order)) - start
    ok = np.zeros(len(order), dtype=bool)
    ok[order] = rank < cap
    keep = ok[:len(w)] & ok[len(w):]
    return SparseWeights(w.n, w.rows[keep], w.cols[keep], w.values[keep])


def step_dynamics(state, h, W, beta, T, activation="logistic"):
    """One synchronous update ``s <- g(beta * (h + W s - T))``.

    ``W`` is a :class:`SparseWeights` or a (sparse) matrix.
    """
    if isinstance(W, SparseWeights):
        W = W.matrix()
    g = ACTIVATIONS[activation]
    return g(beta * (h + W @ state - T))


def run_dynamics(h, W, beta, T, max_iters=50, tol=1e-4, activation="logistic", s0=None):
    """Iterate from ``s0`` (all ones by default) until the state settles.

    Returns ``(state, status, iterations)`` with status ``"converged"``,
    ``"cycle"`` (state repeats with period two) or ``"max_iters"``.
    """
    if isinstance(W, SparseWeights):
        W = W.matrix()
    s = np.ones_like(h) if s0 is None else np.asarray(s0, dtype=np.float64).copy()
    prev = None
    for t in range(1, max_iters + 1):
        nxt = step_dynamics(s, h, W, beta, T, activation)
        if np.max(np.abs(nxt - s)) < tol:
            return nxt, "converged", t
        if prev is not None and np.max(np.abs(nxt - prev)) < tol:
            return nxt, "cycle", t
        prev, s = s, nxt
    return s, "max_iters", max_iters


def calibrate_threshold(h, W, beta, f, max_iters=40, dyn_iters=50, tol=1e-4,
                        activation="logistic", rel_tol=0.1):
    """Bisect the threshold so that a fraction ``f`` of neurons ends up active.

    Returns ``(T, info)``; ``info["warning"]`` is set when the search bracket
    does not straddle ``f`` and an endpoint is returned instead.
    """
    if not 0 < f < 1:
        raise ValueError("target fraction must lie in (0, 1)")
    if isinstance(W, SparseWeights):
        row = W.row_sums()
        W = W.matrix()
    else:
        row = np.asarray(W.sum(axis=1)).ravel()
    h = np.asarray(h, dtype=np.float64)

    def fraction(T):
        s, status, _ = run_dynamics(h, W, beta, T, dyn_iters, tol, activation)
        return float((s > 0.5).mean()), status

    lo = float(h.min() + min(row.min(), 0.0))
    hi = float(h.max())
    f_lo, st_lo = fraction(lo)
    f_hi, st_hi = fraction(hi)
    info = {"bracket": [lo, hi], "warning": None, "steps": 0}
    if f_lo < f:
        info.update(warning="bracket does not straddle target: fraction too low at lower end",
                    fraction=f_lo, status=st_lo)
        return lo, info
    if f_hi > f:
        info.update(warning="bracket does not straddle target: fraction too high at upper end",
                    fraction=f_hi, status=st_hi)
        return hi, info
    best = (abs(f_lo - f), lo, f_lo, st_lo)
    for step in range(1, max_iters + 1):
        mid = 0.5 * (lo + hi)
        f_mid, st_mid = fraction(mid)
        info["steps"] = step
        if abs(f_mid - f) < best[0]:
            best = (abs(f_mid - f), mid, f_mid, st_mid)
        if abs(f_mid - f) <= rel_tol * f:
            break
        if f_mid > f:
            lo = mid
        else:
            hi = mid
    _, T, frac, status = best
    info.update(fraction=frac, status=status)
    if abs(frac - f) > rel_tol * f:
        info["warning"] = f"closest fraction {frac:.4g} misses target {f:.4g}"
    return T, info


def calibrate_h0(h_raw, w):
    """Field scale making the total positive drive equal the total inhibition at ``s = 1``."""
    if len(w) == 0:
        raise ValueError("no couplings: nothing to balance the field against")
    positive = float(np.sum(h_raw))
    if not positive > 0:
        raise ValueError("external field carries no positive flux")
    negative = float(np.abs(w.row_sums()).sum())
    return negative / positive


def run_network(image, shape, fields, params=None):
    """Build field and couplings from projection ``fields`` and run to an attractor."""
    params = params or NetworkParams()
    if not fields:
        raise ValueError("need at least one projection field")
    ny, nx = fields[0].values.shape
    if (ny, nx) != (np.shape(image)[0] - shape.height + 1, np.shape(image)[1] - shape.width + 1):
        raise ValueError("fields were not computed with this image and shape")
    tables = log_prob_tables(fields)
    h_raw = build_external_field(fields, tables, 1.0).ravel()
    w = build_weights(fields, shape, params)
    if params.h0 is not None:
        h0 = params.h0
    elif len(w) and np.sum(h_raw) > 0:
        h0 = calibrate_h0(h_raw, w)
    else:
        h0 = 1.0
    h = h0 * h_raw
    W = w.matrix()
    T, info = calibrate_threshold(h, W, params.beta, params.target_fraction,
                                  params.bisect_iters, params.max_iters, params.tol,
                                  params.activation)
    if info["warning"]:
        warnings.warn(f"threshold calibration: {info['warning']}", RuntimeWarning, stacklevel=2)
    s, status, iters = run_dynamics(h, W, params.beta, T, params.max_iters, params.tol,
                                    params.activation)
    return NetworkResult(s.reshape(ny, nx), h.reshape(ny, nx), w, h0, T, status, iters, info)
