"""Regression trees on small-integer features, grown leaf-wise on residuals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tempora.errors import SchemaError

BIN_OFFSET = 4
N_BINS = 2 * BIN_OFFSET + 1
# Relative tolerances for split selection; the brute-force oracle in the
# tests uses the same two rules.
GAIN_FLOOR = 1e-12
GAIN_TIE = 1e-12


def to_bins(X) -> np.ndarray:
    """Shift integer features in ``-4..4`` to histogram bins ``0..8``."""
    X = np.asarray(X)
    if X.size and (X.min() < -BIN_OFFSET or X.max() > BIN_OFFSET):
        raise SchemaError(f"features must lie in [-{BIN_OFFSET}, {BIN_OFFSET}]")
    return np.ascontiguousarray(X.astype(np.int16) + BIN_OFFSET).astype(np.uint8)


def soft_threshold(s, l1):
    return np.sign(s) * np.maximum(np.abs(s) - l1, 0.0)


def leaf_value(s: float, n: float, lambda_l1: float = 0.0, lambda_l2: float = 0.0) -> float:
    """Regularised leaf output ``sign(S) max(|S| - l1, 0) / (n + l2)``."""
    if n <= 0:
        raise ValueError("leaf needs at least one row")
    return float(soft_threshold(s, lambda_l1) / (n + lambda_l2))


def _score(s, h, l1, l2):
    t = soft_threshold(s, l1)
    return t * t / (h + l2)


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    gain: float


@dataclass
class _Hist:
    g: np.ndarray  # weighted gradient sums, (m, N_BINS)
    w: np.ndarray  # weight sums
    n: np.ndarray  # raw row counts

    def __sub__(self, other: "_Hist") -> "_Hist":
        return _Hist(self.g - other.g, self.w - other.w, self.n - other.n)


def _histogram(bins, grad, weights, rows, features) -> _Hist:
    m = len(features)
    sub = bins[rows][:, features] if m != bins.shape[1] else bins[rows]
    codes = (sub.astype(np.intp) + np.arange(m, dtype=np.intp) * N_BINS).ravel()
    size = m * N_BINS
    g = grad[rows]
    n = np.bincount(codes, minlength=size).astype(np.float64)
    if weights is None:
        gs = np.bincount(codes, weights=np.repeat(g, m), minlength=size)
        ws = n
    else:
        w = weights[rows]
        gs = np.bincount(codes, weights=np.repeat(g * w, m), minlength=size)
        ws = np.bincount(codes, weights=np.repeat(w, m), minlength=size)
    shape = (m, N_BINS)
    return _Hist(gs.reshape(shape), ws.reshape(shape), n.reshape(shape))


def _best_from_hist(hist: _Hist, features, min_data, l1, l2, gain_scale) -> Split | None:
    cnt = hist.n
    total_n = cnt[0].sum()
    if total_n < 2 * min_data:
        return None
    cum_n = np.cumsum(cnt, axis=1)
    cum_g = np.cumsum(hist.g, axis=1)
    cum_w = np.cumsum(hist.w, axis=1)
    total_g = cum_g[:, -1:]
    total_w = cum_w[:, -1:]
    nonempty = cnt > 0
    n_left = cum_n
    n_right = total_n - cum_n
    ok = nonempty & (n_left >= min_data) & (n_right >= min_data) & (n_right > 0)
    if not ok.any():
        return None
    parent = _score(total_g[:, 0], total_w[:, 0], l1, l2)[:, None]
    with np.errstate(invalid="ignore", divide="ignore"):
        gain = (
            _score(cum_g, cum_w, l1, l2)
            + _score(total_g - cum_g, total_w - cum_w, l1, l2)
            - parent
        )
    gain = np.where(ok, gain, -np.inf)
    best = gain.max()
    if not best > GAIN_FLOOR * gain_scale:
        return None
    flat = np.flatnonzero(gain.ravel() >= best - GAIN_TIE * abs(best))[0]
    fi, b = divmod(int(flat), N_BINS)
    nxt = b + 1 + int(np.flatnonzero(nonempty[fi, b + 1 :])[0])
    threshold = (b + nxt) / 2.0 - BIN_OFFSET
    return Split(int(features[fi]), float(threshold), float(gain[fi, b]))


def _gain_scale(grad, weights, rows) -> float:
    g = grad[rows]
    if weights is None:
        return float(np.dot(g, g))
    return float(np.dot(weights[rows] * g, g))


def find_best_split(
    X,
    grad,
    rows=None,
    *,
    min_data_in_leaf: int = 1,
    lambda_l1: float = 0.0,
    lambda_l2: float = 0.0,
    features=None,
    weights=None,
) -> Split | None:
    """Best variance-gain split of ``rows`` over ``features``.

    Candidate thresholds are midpoints between adjacent observed feature
    values; rows with ``x <= threshold`` go left.  Ties within a relative
    ``1e-12`` go to the lower feature index, then the smaller threshold.
    Returns ``None`` when no split has positive gain or both children cannot
    hold ``min_data_in_leaf`` rows.
    """
    bins = to_bins(X)
    grad = np.asarray(grad, dtype=np.float64)
    rows = np.arange(bins.shape[0]) if rows is None else np.asarray(rows, dtype=np.intp)
    features = np.arange(bins.shape[1]) if features is None else np.asarray(features, dtype=np.intp)
    weights = None if weights is None else np.asarray(weights, dtype=np.float64)
    hist = _histogram(bins, grad, weights, rows, features)
    return _best_from_hist(
        hist, features, min_data_in_leaf, lambda_l1, lambda_l2, _gain_scale(grad, weights, rows)
    )


@dataclass(frozen=True, eq=False)
class Tree:
    """Binary tree stored as parallel node arrays.

    Internal nodes have ``feature >= 0``; leaves have ``feature == -1`` and
    carry ``value``.  ``count`` is the training occupancy of each node.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    count: np.ndarray

    @classmethod
    def leaf(cls, value: float, count: int = 0) -> "Tree":
        return cls(
            np.array([-1], np.int32), np.array([0.0]), np.array([-1], np.int32),
            np.array([-1], np.int32), np.array([float(value)]), np.array([count], np.int64),
        )

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def depth(self) -> int:
        def walk(i):
            if self.feature[i] < 0:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))

        return walk(0)

    def leaf_counts(self) -> np.ndarray:
        return self.count[self.feature < 0]

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X)
        node = np.zeros(X.shape[0], dtype=np.intp)
        rows = np.arange(X.shape[0])
        active = self.feature[node] >= 0
        while active.any():
            r = rows[active]
            nd = node[r]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return self.value[node]

    def preorder(self) -> list:
        """Nodes in pre-order as ``("node", f, thr)`` / ``("leaf", value)`` tuples."""
        out = []
        stack = [0]
        while stack:
            i = stack.pop()
            if self.feature[i] < 0:
                out.append(("leaf", float(self.value[i])))
            else:
                out.append(("node", int(self.feature[i]), float(self.threshold[i])))
                stack.append(int(self.right[i]))
                stack.append(int(self.left[i]))
        return out

    @classmethod
    def from_preorder(cls, items) -> "Tree":
        feature, threshold, left, right, value = [], [], [], [], []
        pos = 0

        def build():
            nonlocal pos
            item = items[pos]
            pos += 1
            i = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            if item[0] == "leaf":
                value[i] = float(item[1])
            else:
                feature[i] = int(item[1])
                threshold[i] = float(item[2])
                left[i] = build()
                right[i] = build()
            return i

        build()
        if pos != len(items):
            raise ValueError("trailing nodes after complete tree")
        n = len(feature)
        return cls(
            np.array(feature, np.int32), np.array(threshold), np.array(left, np.int32),
            np.array(right, np.int32), np.array(value), np.zeros(n, np.int64),
        )

    def __eq__(self, other):
        if not isinstance(other, Tree):
            return NotImplemented
        return self.preorder() == other.preorder()

    __hash__ = None


@dataclass
class _Leaf:
    node: int
    rows: np.ndarray
    depth: int
    hist: _Hist
    split: Split | None


def grow_tree(
    bins: np.ndarray,
    grad: np.ndarray,
    rows: np.ndarray,
    *,
    num_leaves: int,
    max_depth: int,
    min_data_in_leaf: int,
    lambda_l1: float,
    lambda_l2: float,
    features: np.ndarray,
    weights: np.ndarray | None = None,
) -> Tree:
    """Grow one tree best-gain-first until ``num_leaves`` or no positive gain.

    ``bins`` comes from :func:`to_bins`; ``rows`` must be sorted ascending.
    Leaf values are computed from direct sums over each leaf's rows.
    """
    feature = [-1]
    threshold = [0.0]
    left = [-1]
    right = [-1]
    count = [len(rows)]

    def can_split(depth):
        return max_depth <= 0 or depth < max_depth

    def best(hist, r, depth):
        if not can_split(depth):
            return None
        return _best_from_hist(
            hist, features, min_data_in_leaf, lambda_l1, lambda_l2, _gain_scale(grad, weights, r)
        )

    root_hist = _histogram(bins, grad, weights, rows, features)
    leaves = [_Leaf(0, rows, 0, root_hist, best(root_hist, rows, 0))]
    while len(leaves) < num_leaves:
        candidates = [i for i, lf in enumerate(leaves) if lf.split is not None]
        if not candidates:
            break
        top = max(l.split.gain for l in (leaves[i] for i in candidates))
        pick = min(
            (i for i in candidates if leaves[i].split.gain >= top - GAIN_TIE * abs(top)),
            key=lambda i: leaves[i].node,
        )
        lf = leaves.pop(pick)
        sp = lf.split
        thr_bin = sp.threshold + BIN_OFFSET
        go_left = bins[lf.rows, sp.feature] <= thr_bin
        lrows, rrows = lf.rows[go_left], lf.rows[~go_left]
        if len(lrows) <= len(rrows):
            lh = _histogram(bins, grad, weights, lrows, features)
            rh = lf.hist - lh
        else:
            rh = _histogram(bins, grad, weights, rrows, features)
            lh = lf.hist - rh
        li, ri = len(feature), len(feature) + 1
        feature[lf.node] = sp.feature
        threshold[lf.node] = sp.threshold
        left[lf.node] = li
        right[lf.node] = ri
        for r in (lrows, rrows):
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            count.append(len(r))
        d = lf.depth + 1
        leaves.append(_Leaf(li, lrows, d, lh, best(lh, lrows, d)))
        leaves.append(_Leaf(ri, rrows, d, rh, best(rh, rrows, d)))

    value = np.zeros(len(feature))
    for lf in leaves:
        g = grad[lf.rows]
        if weights is None:
            s, h = np.sum(g), len(lf.rows)
        else:
            w = weights[lf.rows]
            s, h = np.sum(g * w), np.sum(w)
        value[lf.node] = leaf_value(s, h, lambda_l1, lambda_l2)
    return Tree(
        np.array(feature, np.int32), np.array(threshold), np.array(left, np.int32),
        np.array(right, np.int32), value, np.array(count, np.int64),
    )
