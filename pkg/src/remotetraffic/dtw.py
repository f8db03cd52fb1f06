"""Dynamic time warping distance between recovered series.

The distance is the minimum, over monotone continuous alignments anchored
at both ends, of the weighted mean of ``|a_i - b_j|``::

    D(A, B) = min_F  sum_k d(c(k)) w(k) / sum_k w(k)

Each pair's weight is the weight of the step that reached it (the first
pair counts as a diagonal step). With uniform weights the denominator is
the path length, which varies between paths, so the normalized minimum is a
ratio objective. It is solved exactly with Dinkelbach's parametric method:
repeatedly minimise ``sum w (d - lam)`` by dynamic programming and move
``lam`` to the ratio of the path found, until the ratio stops falling.
Every iteration is an ordinary O(I*J) (or O(I*window)) DP pass.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

from .errors import InvalidArgument

DIAG, HORIZ, VERT = 0, 1, 2


@dataclass(frozen=True)
class DtwConfig:
    """``step_weights`` is (diagonal, horizontal, vertical).

    Horizontal steps advance along the second series, vertical steps along
    the first. ``window`` is a Sakoe-Chiba half-width ``|i - j| <= window``.
    ``trim`` strips leading and trailing zeros before aligning.
    """

    step_weights: tuple = (1.0, 1.0, 1.0)
    window: int | None = None
    normalize: bool = True
    trim: bool = False

    def __post_init__(self):
        w = tuple(float(x) for x in self.step_weights)
        if len(w) != 3 or any(not x >= 0 for x in w) or max(w) <= 0:
            raise InvalidArgument("step_weights needs three non-negative values, one positive")
        if self.normalize and min(w) <= 0:
            # a zero-weight path would make the normalized ratio undefined
            raise InvalidArgument("normalized DTW requires all step weights > 0")
        if self.window is not None and self.window < 1:
            raise InvalidArgument("window must be >= 1")
        object.__setattr__(self, "step_weights", w)


@dataclass(frozen=True, eq=False)
class WarpPath:
    """0-based (i, j) pairs from (0, 0) to (I-1, J-1)."""

    pairs: np.ndarray

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return (tuple(p) for p in self.pairs.tolist())

    def __eq__(self, other):
        return isinstance(other, WarpPath) and np.array_equal(self.pairs, other.pairs)

    def is_admissible(self, n_a: int, n_b: int) -> bool:
        p = self.pairs
        if len(p) == 0 or tuple(p[0]) != (0, 0) or tuple(p[-1]) != (n_a - 1, n_b - 1):
            return False
        steps = np.diff(p, axis=0)
        return bool(np.all((steps >= 0) & (steps <= 1)) and np.all(steps.sum(axis=1) >= 1))


@dataclass(frozen=True)
class DtwResult:
    distance: float
    path: WarpPath
    cells: int = 0
    passes: int = 1
    weighted_cost: float = field(default=0.0, repr=False)
    weight_sum: float = field(default=0.0, repr=False)

    def __iter__(self):
        # unpacks as (distance, path)
        yield self.distance
        yield self.path


@numba.njit(nogil=True, cache=True)
def _dp_pass(a, b, wd, wh, wv, lam, lo, hi, dirs):
    """One DP pass minimising sum w*(|a_i-b_j| - lam). Fills ``dirs`` (band-relative)."""
    n_a = a.shape[0]
    n_b = b.shape[0]
    inf = np.inf
    prev = np.full(n_b, inf)
    cur = np.full(n_b, inf)
    cells = 0
    for i in range(n_a):
        l, h = lo[i], hi[i]
        for j in range(l, h):
            e = abs(a[i] - b[j]) - lam
            cells += 1
            if i == 0 and j == 0:
                cur[j] = wd * e
                dirs[i, 0] = DIAG
                continue
            best = inf
            d = DIAG
            if i > 0 and j > 0:
                best = prev[j - 1] + wd * e
            if j > 0:
                v = cur[j - 1] + wh * e
                if v < best:
                    best = v
                    d = HORIZ
            if i > 0:
                v = prev[j] + wv * e
                if v < best:
                    best = v
                    d = VERT
            cur[j] = best
            dirs[i, j - l] = d
        # clear the row about to be overwritten, then swap
        if i > 0:
            for j in range(lo[i - 1], hi[i - 1]):
                prev[j] = inf
        prev, cur = cur, prev
    return cells


@numba.njit(nogil=True, cache=True)
def _backtrack(a, b, wd, wh, wv, lo, dirs):
    n_a = a.shape[0]
    n_b = b.shape[0]
    out = np.empty((n_a + n_b - 1, 2), dtype=np.int64)
    step = np.empty(n_a + n_b - 1, dtype=np.int64)
    i, j = n_a - 1, n_b - 1
    k = 0
    while i > 0 or j > 0:
        out[k, 0] = i
        out[k, 1] = j
        d = dirs[i, j - lo[i]]
        step[k] = d
        k += 1
        if d == DIAG:
            i -= 1
            j -= 1
        elif d == HORIZ:
            j -= 1
        else:
            i -= 1
    out[k, 0] = 0
    out[k, 1] = 0
    step[k] = DIAG
    k += 1
    pairs = out[:k][::-1].copy()
    steps = step[:k][::-1].copy()
    cost = 0.0
    wsum = 0.0
    for m in range(k):
        s = steps[m]
        w = wd if s == DIAG else (wh if s == HORIZ else wv)
        cost += w * abs(a[pairs[m, 0]] - b[pairs[m, 1]])
        wsum += w
    return pairs, cost, wsum


def band_limits(n_a: int, n_b: int, window: int | None) -> tuple[np.ndarray, np.ndarray]:
    """Per-row [lo, hi) column range of the lattice."""
    if window is None:
        return np.zeros(n_a, dtype=np.int64), np.full(n_a, n_b, dtype=np.int64)
    if abs(n_a - n_b) > window:
        raise InvalidArgument(f"band of half-width {window} cannot join series of lengths {n_a} and {n_b}")
    rows = np.arange(n_a, dtype=np.int64)
    return np.maximum(rows - window, 0), np.minimum(rows + window + 1, n_b)


def _prepare(x, cfg: DtwConfig) -> np.ndarray:
    values = getattr(x, "values", x)
    values = np.ascontiguousarray(values, dtype=float)
    if values.ndim != 1 or len(values) == 0:
        raise InvalidArgument("series must be one-dimensional and non-empty")
    if cfg.trim:
        nz = np.flatnonzero(values)
        values = values[nz[0] : nz[-1] + 1] if len(nz) else values[:1]
    return values


def _check_units(a, b):
    ua, ub = getattr(a, "units", None), getattr(b, "units", None)
    if ua is not None and ub is not None and ua != ub:
        raise InvalidArgument(f"unit mismatch: {ua} vs {ub}")


def dtw_distance(a, b, cfg: DtwConfig | None = None) -> DtwResult:
    """DTW distance and one optimal warp path between two series.

    Accepts ``RecoveredSeries`` or plain 1-D sequences. Ties in the DP are
    broken diagonal first, then horizontal, then vertical. With equal
    horizontal and vertical weights the lattice is solved with the series in
    a canonical order, so the tie-break applies in that orientation.
    """
    cfg = cfg or DtwConfig()
    _check_units(a, b)
    x, y = _prepare(a, cfg), _prepare(b, cfg)
    if cfg.step_weights[1] == cfg.step_weights[2] and (len(y), y.tobytes()) < (len(x), x.tobytes()):
        # symmetric weights: solve in a canonical orientation so D(A,B) == D(B,A) bit for bit
        r = _solve(y, x, cfg)
        return DtwResult(r.distance, WarpPath(r.path.pairs[:, ::-1].copy()), r.cells, r.passes,
                         r.weighted_cost, r.weight_sum)
    return _solve(x, y, cfg)


def _solve(x: np.ndarray, y: np.ndarray, cfg: DtwConfig) -> DtwResult:
    lo, hi = band_limits(len(x), len(y), cfg.window)
    width = int(np.max(hi - lo))
    dirs = np.empty((len(x), width), dtype=np.uint8)
    wd, wh, wv = cfg.step_weights

    cells = _dp_pass(x, y, wd, wh, wv, 0.0, lo, hi, dirs)
    pairs, cost, wsum = _backtrack(x, y, wd, wh, wv, lo, dirs)
    passes = 1
    if not cfg.normalize:
        return DtwResult(cost, WarpPath(pairs), cells, passes, cost, wsum)

    ratio = cost / wsum
    while ratio > 0:
        cells += _dp_pass(x, y, wd, wh, wv, ratio, lo, hi, dirs)
        passes += 1
        p2, c2, w2 = _backtrack(x, y, wd, wh, wv, lo, dirs)
        r2 = c2 / w2
        if not r2 < ratio:
            break
        pairs, cost, wsum, ratio = p2, c2, w2, r2
    return DtwResult(ratio, WarpPath(pairs), cells, passes, cost, wsum)


def distance_matrix(samples: Sequence, cfg: DtwConfig | None = None, jobs: int = 1) -> np.ndarray:
    """Matrix of pairwise DTW distances with a zero diagonal.

    Symmetric whenever the horizontal and vertical weights agree; only the
    upper triangle is computed in that case.
    """
    cfg = cfg or DtwConfig()
    samples = list(samples)
    units = {getattr(s, "units", None) for s in samples} - {None}
    if len(units) > 1:
        raise InvalidArgument(f"samples mix units: {sorted(units)}")
    n = len(samples)
    out = np.zeros((n, n))
    symmetric = cfg.step_weights[1] == cfg.step_weights[2]
    pairs = [(p, q) for p in range(n) for q in range(n) if (p < q if symmetric else p != q)]

    def one(pq):
        p, q = pq
        return dtw_distance(samples[p], samples[q], cfg).distance

    if jobs > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(jobs) as pool:
            values = list(pool.map(one, pairs))
    else:
        values = [one(pq) for pq in pairs]
    for (p, q), v in zip(pairs, values):
        out[p, q] = v
        if symmetric:
            out[q, p] = v
    return out


def cross_distances(queries: Sequence, references: Sequence, cfg: DtwConfig | None = None) -> np.ndarray:
    """``len(queries) x len(references)`` matrix of DTW distances."""
    cfg = cfg or DtwConfig()
    return np.array([[dtw_distance(q, r, cfg).distance for r in references] for q in queries]).reshape(
        len(queries), len(references)
    )
