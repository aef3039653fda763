"""Multi-output CART regression trees and min_samples_split cross-validation.

Splits are exact and greedy: for every feature the node's samples are
scanned in sorted order and the threshold minimising the summed
within-child squared error (over all output columns) is taken. Ties go
to the lowest feature index, then the lowest threshold. Thresholds are
midpoints between consecutive distinct values. ``min_samples_split`` is
the only regulariser.

Because the split chosen at a node never depends on
``min_samples_split``, a tree grown with a larger value is exactly the
fully grown tree cut at the first node holding fewer samples.
:func:`cross_validate` relies on this: one tree per fold scores the
whole grid.

Feature orderings are computed once per design matrix
(:class:`PresortedFeatures`) and restricted to training rows in linear
time, so repeated fits on row subsets never re-sort.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numba
import numpy as np

from .core import (
    ConfigurationError,
    DimensionError,
    FcitError,
    SeedStream,
    as_matrix,
)

N_FOLDS = 3
# relative SSE-reduction difference below which two candidate splits tie
_TIE_RTOL = 1e-12


class FitError(FcitError, ValueError):
    pass


class FoldError(FcitError, ValueError):
    pass


@dataclass(frozen=True, order=True)
class TreeParams:
    min_samples_split: int = 2

    def __post_init__(self):
        m = self.min_samples_split
        if int(m) != m or m < 2:
            raise ConfigurationError(f"min_samples_split must be an integer >= 2, got {m}")
        object.__setattr__(self, "min_samples_split", int(m))


@dataclass(frozen=True, eq=False)
class RegressionTree:
    """Fitted tree stored as flat node arrays (node 0 is the root).

    ``feature[i] == -1`` marks a leaf. ``value[i]`` is the mean target of
    the training rows reaching node ``i``; it is kept for internal
    nodes too so the tree can be evaluated at any larger
    ``min_samples_split`` by truncation.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    n_node_samples: np.ndarray
    value: np.ndarray
    n_in: int
    n_out: int
    min_samples_split: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def predict(self, x: np.ndarray, min_samples_split: Optional[int] = None) -> np.ndarray:
        """Predict rows of ``x``.

        With ``min_samples_split`` larger than the one used for fitting,
        prediction stops at the first node with fewer training samples,
        which equals predicting with a tree fitted at that value.
        """
        x = as_matrix(x, "x")
        if x.shape[1] != self.n_in:
            raise DimensionError(f"tree expects {self.n_in} columns, got {x.shape[1]}")
        cut = self.min_samples_split if min_samples_split is None else int(min_samples_split)
        return _predict(
            self.feature, self.threshold, self.left, self.right,
            self.n_node_samples, self.value, x, cut,
        )


@dataclass(frozen=True)
class CvResult:
    best_params: TreeParams
    grid: tuple[tuple[TreeParams, float], ...]


# ---------------------------------------------------------------- kernels


@numba.njit(nogil=True, cache=True)
def _restrict_order(order, loc, n_local):
    d, n = order.shape
    out = np.empty((d, n_local), np.int32)
    for f in range(d):
        k = 0
        for j in range(n):
            i = loc[order[f, j]]
            if i >= 0:
                out[f, k] = i
                k += 1
    return out


@numba.njit(nogil=True, cache=True, fastmath=True)
def _scan_feature(xf, row, y, start, end, s_tot, tot_sq, s_left):
    """Best split of one feature: returns (proxy, position)."""
    d_out = y.shape[1]
    m = end - start
    best = -1.0
    best_pos = -1
    for k in range(d_out):
        s_left[k] = 0.0
    if d_out == 1:
        sl = 0.0
        st = s_tot[0]
        for j in range(start, end - 1):
            i = row[j]
            sl += y[i, 0]
            if xf[i] < xf[row[j + 1]]:
                nl = j - start + 1
                sr = st - sl
                proxy = sl * sl / nl + sr * sr / (m - nl)
                if proxy > best:
                    best = proxy
                    best_pos = j
        return best, best_pos
    for j in range(start, end - 1):
        i = row[j]
        if xf[i] < xf[row[j + 1]]:
            a = 0.0
            b = 0.0
            for k in range(d_out):
                v = s_left[k] + y[i, k]
                s_left[k] = v
                a += v * v
                b += v * s_tot[k]
            nl = j - start + 1
            proxy = a / nl + (tot_sq - 2.0 * b + a) / (m - nl)
            if proxy > best:
                best = proxy
                best_pos = j
        else:
            for k in range(d_out):
                s_left[k] += y[i, k]
    return best, best_pos


@numba.njit(nogil=True, cache=True)
def _grow(xt, y, order, min_split, tie_rtol):
    d_in, n = xt.shape
    d_out = y.shape[1]
    cap = 2 * n - 1
    feature = np.full(cap, -1, np.int32)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int32)
    right = np.full(cap, -1, np.int32)
    seg_start = np.zeros(cap, np.int64)
    seg_end = np.zeros(cap, np.int64)

    goes_left = np.zeros(n, np.bool_)
    buf = np.empty(n, np.int32)
    s_tot = np.empty(d_out)
    s_left = np.empty(d_out)
    mean = np.empty(d_out)
    stack = np.empty(n + 1, np.int64)

    value = np.zeros((min(cap, 1024), d_out))
    n_nodes = 1
    seg_start[0] = 0
    seg_end[0] = n
    sp = 0
    stack[sp] = 0
    sp += 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        start = seg_start[node]
        end = seg_end[node]
        m = end - start
        # every order[f] segment is still sorted by feature f here, so the
        # summation order does not depend on how deep the tree grows later
        row0 = order[0]
        for k in range(d_out):
            s_tot[k] = 0.0
        for j in range(start, end):
            i = row0[j]
            for k in range(d_out):
                s_tot[k] += y[i, k]
        if node >= value.shape[0]:
            grown = np.zeros((min(cap, max(2 * value.shape[0], node + 1)), d_out))
            grown[: value.shape[0]] = value
            value = grown
        for k in range(d_out):
            value[node, k] = s_tot[k] / m
        if m < min_split:
            continue
        first = row0[start]
        constant = True
        for j in range(start + 1, end):
            i = row0[j]
            for k in range(d_out):
                if y[i, k] != y[first, k]:
                    constant = False
                    break
            if not constant:
                break
        if constant:
            continue

        tot_sq = 0.0
        for k in range(d_out):
            mean[k] = s_tot[k] / m
            tot_sq += s_tot[k] * s_tot[k]
        sse = 0.0
        for j in range(start, end):
            i = row0[j]
            for k in range(d_out):
                r = y[i, k] - mean[k]
                sse += r * r
        base = tot_sq / m
        tol = tie_rtol * sse

        best_gain = -1.0
        best_f = -1
        best_pos = -1
        for f in range(d_in):
            row = order[f]
            xf = xt[f]
            if xf[row[start]] >= xf[row[end - 1]]:
                continue
            proxy, pos = _scan_feature(xf, row, y, start, end, s_tot, tot_sq, s_left)
            if pos < 0:
                continue
            gain = proxy - base
            if best_f < 0 or gain > best_gain + tol:
                best_gain = gain
                best_f = f
                best_pos = pos
        if best_f < 0:
            continue

        row = order[best_f]
        xf = xt[best_f]
        lo = xf[row[best_pos]]
        hi = xf[row[best_pos + 1]]
        thr = 0.5 * (lo + hi)
        if thr >= hi or thr < lo:
            thr = lo
        nl = best_pos - start + 1
        for j in range(start, end):
            goes_left[row[j]] = j <= best_pos
        for f in range(d_in):
            if f == best_f:
                continue
            r = order[f]
            a = start
            b = 0
            for j in range(start, end):
                i = r[j]
                if goes_left[i]:
                    r[a] = i
                    a += 1
                else:
                    buf[b] = i
                    b += 1
            for j in range(b):
                r[a + j] = buf[j]

        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = thr
        left[node] = lc
        right[node] = rc
        seg_start[lc] = start
        seg_end[lc] = start + nl
        seg_start[rc] = start + nl
        seg_end[rc] = end
        stack[sp] = rc
        sp += 1
        stack[sp] = lc
        sp += 1

    counts = seg_end[:n_nodes] - seg_start[:n_nodes]
    return (
        feature[:n_nodes].copy(), threshold[:n_nodes].copy(),
        left[:n_nodes].copy(), right[:n_nodes].copy(), counts, value[:n_nodes].copy(),
    )


@numba.njit(nogil=True, cache=True)
def _predict(feature, threshold, left, right, counts, value, x, min_split):
    n = x.shape[0]
    d_out = value.shape[1]
    out = np.empty((n, d_out))
    for r in range(n):
        node = 0
        while feature[node] >= 0 and counts[node] >= min_split:
            if x[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        for k in range(d_out):
            out[r, k] = value[node, k]
    return out


# ---------------------------------------------------------------- public API


class PresortedFeatures:
    """A design matrix with per-column sort orders computed once.

    ``xt`` is the transposed matrix (features x samples) and
    ``order[f]`` lists sample indices sorted by feature ``f`` (stable).
    """

    def __init__(self, x: np.ndarray, _xt=None, _order=None):
        if _xt is None:
            x = as_matrix(x, "x")
            _xt = np.ascontiguousarray(x.T)
            _order = np.argsort(_xt, axis=1, kind="stable").astype(np.int32)
        self.xt = _xt
        self.order = _order

    @property
    def n_rows(self) -> int:
        return self.xt.shape[1]

    @property
    def n_cols(self) -> int:
        return self.xt.shape[0]

    def columns(self, start: int, stop: int) -> PresortedFeatures:
        return PresortedFeatures(None, self.xt[start:stop], self.order[start:stop])

    def permuted(self, perm: np.ndarray) -> PresortedFeatures:
        """Same data with rows reordered so that new row ``i`` is old row ``perm[i]``."""
        perm = np.asarray(perm, dtype=np.int64)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(len(perm))
        return PresortedFeatures(
            None, np.ascontiguousarray(self.xt[:, perm]), inv[self.order].astype(np.int32)
        )

    def rows(self, idx: np.ndarray) -> np.ndarray:
        """Row-major copy of the selected rows."""
        return np.ascontiguousarray(self.xt[:, idx].T)

    def fit(self, y: np.ndarray, rows: Optional[np.ndarray], params: TreeParams) -> RegressionTree:
        """Fit on the subset ``rows`` (all rows when ``None``)."""
        y = as_matrix(y, "y")
        if y.shape[0] != self.n_rows:
            raise DimensionError(f"x has {self.n_rows} rows, y has {y.shape[0]}")
        if rows is None:
            xt, yy = self.xt, y
            order = self.order.copy()
        else:
            rows = np.asarray(rows, dtype=np.int64)
            loc = np.full(self.n_rows, -1, dtype=np.int64)
            loc[rows] = np.arange(len(rows))
            xt = np.ascontiguousarray(self.xt[:, rows])
            yy = np.ascontiguousarray(y[rows])
            order = _restrict_order(self.order, loc, len(rows))
        if yy.shape[0] < 1:
            raise FitError("cannot fit a tree on zero rows")
        if xt.shape[0] == 0:
            order = np.zeros((1, yy.shape[0]), np.int32)
            order[0] = np.arange(yy.shape[0])
            xt = np.zeros((0, yy.shape[0]))
            parts = _grow(xt, yy, order, 1 << 62, _TIE_RTOL)
        else:
            parts = _grow(xt, yy, order, params.min_samples_split, _TIE_RTOL)
        return RegressionTree(
            *parts, n_in=self.n_cols, n_out=yy.shape[1],
            min_samples_split=params.min_samples_split,
        )


def fit_tree(
    x: np.ndarray,
    y: np.ndarray,
    params: TreeParams = TreeParams(),
    seed: Optional[SeedStream] = None,
) -> RegressionTree:
    """Fit a regression tree of ``y`` on ``x``.

    Fitting is fully deterministic; ``seed`` is accepted for interface
    symmetry with the other fitting routines and is not consumed.
    """
    x = as_matrix(x, "x")
    y = as_matrix(y, "y")
    if x.shape[0] != y.shape[0]:
        raise DimensionError(f"x has {x.shape[0]} rows, y has {y.shape[0]}")
    if x.shape[0] < 1:
        raise FitError("cannot fit a tree on zero rows")
    return PresortedFeatures(x).fit(y, None, params)


def predict(tree: RegressionTree, x: np.ndarray) -> np.ndarray:
    return tree.predict(x)


def default_grid(n: int) -> list[TreeParams]:
    cands = {2, 8, 64, 512, max(2, int(0.01 * n)), max(2, int(0.1 * n))}
    clipped = sorted({max(2, min(m, n)) for m in cands})
    return [TreeParams(m) for m in clipped]


def _fold_ids(n: int, seed: SeedStream) -> list[np.ndarray]:
    perm = seed.rng().permutation(n)
    return np.array_split(perm, N_FOLDS)


def cross_validate_presorted(
    data: PresortedFeatures,
    y: np.ndarray,
    grid: Optional[Sequence[TreeParams]] = None,
    seed: SeedStream = SeedStream(0),
    check: Optional[Callable[[], None]] = None,
) -> CvResult:
    """Cross-validation on presorted features; ``check`` is called before each fold."""
    y = as_matrix(y, "y")
    n = data.n_rows
    if y.shape[0] != n:
        raise DimensionError(f"x has {n} rows, y has {y.shape[0]}")
    grid = default_grid(n) if grid is None else list(grid)
    if not grid:
        raise ConfigurationError("hyperparameter grid is empty")
    if n < 10:
        raise FoldError(f"need at least 10 rows for {N_FOLDS}-fold cross-validation, got {n}")
    ms = [p.min_samples_split for p in grid]

    folds = _fold_ids(n, seed)
    sse = np.zeros(len(grid))
    for k in range(N_FOLDS):
        if check is not None:
            check()
        val = folds[k]
        train = np.concatenate([folds[j] for j in range(N_FOLDS) if j != k])
        tree = data.fit(y, train, TreeParams(min(ms)))
        xv = data.rows(val)
        for g, m in enumerate(ms):
            resid = tree.predict(xv, m) - y[val]
            sse[g] += np.mean(resid**2)
    scores = sse / N_FOLDS
    # ties go to the larger min_samples_split
    best_i = min(range(len(grid)), key=lambda i: (scores[i], -ms[i]))
    return CvResult(grid[best_i], tuple((p, float(s)) for p, s in zip(grid, scores)))


def cross_validate(
    x: np.ndarray,
    y: np.ndarray,
    grid: Optional[Sequence[TreeParams]] = None,
    seed: SeedStream = SeedStream(0),
) -> CvResult:
    """Pick ``min_samples_split`` by 3-fold cross-validated MSE.

    Rows are shuffled once with ``seed`` and cut into three folds. Each
    grid entry is scored by its validation MSE averaged over folds; the
    lowest wins and ties go to the larger value. If no column of ``x``
    varies, the largest grid entry (a constant predictor) is returned.
    """
    x = as_matrix(x, "x")
    y = as_matrix(y, "y")
    if x.shape[0] != y.shape[0]:
        raise DimensionError(f"x has {x.shape[0]} rows, y has {y.shape[0]}")
    if grid is not None and len(grid) == 0:
        raise ConfigurationError("hyperparameter grid is empty")
    if x.shape[0] < 10:
        raise FoldError(f"need at least 10 rows, got {x.shape[0]}")
    return cross_validate_presorted(PresortedFeatures(x), y, grid, seed)
