"""Tree-building and forest-traversal kernels.

Each kernel exists twice: a loop form compiled with numba, and a vectorised
numpy form.  Both produce bit-identical trees.  Set
``DIRECTIVE_DSE_DISABLE_NUMBA=1`` (or run without numba installed) to use the
numpy forms.
"""

from __future__ import annotations

import logging
import os

import numpy as np

logger = logging.getLogger(__name__)

CRITERION_MSE = 0
CRITERION_GINI = 1

_DISABLED = os.environ.get("DIRECTIVE_DSE_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _DISABLED


def _impurity_py(s, sq, n, criterion):
    # n * node impurity: sum of squared errors, or n * gini for 0/1 labels
    if criterion == CRITERION_MSE:
        return sq - s * s / n
    return 2.0 * s * (n - s) / n


def bin_features(X):
    """Per-feature sorted unique values and each row's bin code.

    Returns ``codes`` (n_features, n_rows), ``bin_values`` (n_features,
    max_bins, padded with +inf) and ``n_bins`` (n_features,).
    """
    X = np.asarray(X, dtype=np.float64)
    n, n_feat = X.shape
    uniques = [np.unique(X[:, f]) for f in range(n_feat)]
    width = max((len(u) for u in uniques), default=1)
    codes = np.empty((n_feat, n), np.int64)
    bin_values = np.full((n_feat, max(width, 1)), np.inf)
    n_bins = np.empty(n_feat, np.int64)
    for f, u in enumerate(uniques):
        codes[f] = np.searchsorted(u, X[:, f])
        bin_values[f, :len(u)] = u
        n_bins[f] = len(u)
    return codes, bin_values, n_bins


def _node_features_py(keys, n_feat, n_sub, perm):
    # Fisher-Yates shuffle driven by the node's uniforms, then the first n_sub
    # entries sorted ascending (ties in gain go to the lowest feature index).
    for i in range(n_feat):
        perm[i] = i
    for i in range(n_feat - 1):
        j = i + int(keys[i] * (n_feat - i))
        t = perm[i]
        perm[i] = perm[j]
        perm[j] = t
    for i in range(1, n_sub):
        t = perm[i]
        k = i - 1
        while k >= 0 and perm[k] > t:
            perm[k + 1] = perm[k]
            k -= 1
        perm[k + 1] = t


# ---------------------------------------------------------------- loop form

def _build_tree_loops(codes, bin_values, n_bins, y, rows, feature_keys, n_sub, max_depth, min_leaf, criterion):
    # Split search is a histogram over each feature's value bins: per-bin sums
    # accumulate in node order, then bins are swept in ascending value order.
    n_rows = rows.shape[0]
    n_feat = codes.shape[0]
    cap = 2 * n_rows - 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros(cap)

    width = bin_values.shape[1]
    h_cnt = np.zeros(width, np.int64)
    h_s = np.zeros(width)
    h_sq = np.zeros(width)
    idx = rows.copy()
    buf = np.empty(n_rows, np.int64)
    perm = np.empty(n_feat, np.int64)

    st_node = np.empty(cap, np.int64)
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n_rows
    st_depth[0] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = st_node[top]
        start = st_start[top]
        end = st_end[top]
        depth = st_depth[top]
        n = end - start

        s_t = 0.0
        sq_t = 0.0
        y_min = y[idx[start]]
        y_max = y_min
        for k in range(start, end):
            v = y[idx[k]]
            s_t += v
            sq_t += v * v
            if v < y_min:
                y_min = v
            if v > y_max:
                y_max = v
        value[node] = s_t / n

        if depth >= max_depth or n < 2 * min_leaf or y_min == y_max:
            continue
        parent = _impurity(s_t, sq_t, float(n), criterion)

        _node_features(feature_keys[node], n_feat, n_sub, perm)
        best_gain = -np.inf
        best_f = -1
        best_thr = 0.0
        j = 0
        while j < n_feat:
            if j >= n_sub and best_f >= 0:
                break
            f = perm[j]
            j += 1
            nb = n_bins[f]
            if nb < 2:
                continue
            cf = codes[f]
            for b in range(nb):
                h_cnt[b] = 0
                h_s[b] = 0.0
                h_sq[b] = 0.0
            for k in range(start, end):
                r = idx[k]
                b = cf[r]
                v = y[r]
                h_cnt[b] += 1
                h_s[b] += v
                h_sq[b] += v * v
            s_l = 0.0
            sq_l = 0.0
            n_l = 0
            prev = -1
            for b in range(nb):
                if h_cnt[b] == 0:
                    continue
                if prev >= 0:
                    n_r = n - n_l
                    if n_l >= min_leaf and n_r >= min_leaf:
                        gain = parent - _impurity(s_l, sq_l, float(n_l), criterion) - _impurity(
                            s_t - s_l, sq_t - sq_l, float(n_r), criterion)
                        if gain > best_gain:
                            best_gain = gain
                            best_f = f
                            best_thr = (bin_values[f, prev] + bin_values[f, b]) * 0.5
                s_l += h_s[b]
                sq_l += h_sq[b]
                n_l += h_cnt[b]
                prev = b

        if best_f < 0:
            continue

        cf = codes[best_f]
        n_left = 0
        n_right = 0
        for k in range(start, end):
            r = idx[k]
            if bin_values[best_f, cf[r]] <= best_thr:
                idx[start + n_left] = r
                n_left += 1
            else:
                buf[n_right] = r
                n_right += 1
        for k in range(n_right):
            idx[start + n_left + k] = buf[k]

        feature[node] = best_f
        threshold[node] = best_thr
        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        left[node] = lc
        right[node] = rc
        st_node[top] = rc
        st_start[top] = start + n_left
        st_end[top] = end
        st_depth[top] = depth + 1
        top += 1
        st_node[top] = lc
        st_start[top] = start
        st_end[top] = start + n_left
        st_depth[top] = depth + 1
        top += 1

    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes]


def _predict_forest_loops(feature, threshold, left, right, value, roots, X):
    n = X.shape[0]
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for t in range(roots.shape[0]):
            node = roots[t]
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            acc += value[node]
        out[i] = acc / roots.shape[0]
    return out


# --------------------------------------------------------------- numpy form

def _best_split_numpy(codes_f, values_f, nb, y_node, s_t, sq_t, parent, min_leaf, criterion):
    cnt = np.bincount(codes_f, minlength=nb)
    present = np.flatnonzero(cnt)
    if len(present) < 2:
        return -np.inf, 0.0, False
    h_s = np.bincount(codes_f, weights=y_node, minlength=nb)[present]
    h_sq = np.bincount(codes_f, weights=y_node * y_node, minlength=nb)[present]
    c = cnt[present]
    # left side = bins [0, i], split after bin i
    s_l = np.cumsum(h_s)[:-1]
    sq_l = np.cumsum(h_sq)[:-1]
    n = float(len(codes_f))
    n_l = np.cumsum(c)[:-1].astype(np.float64)
    n_r = n - n_l
    ok = (n_l >= min_leaf) & (n_r >= min_leaf)
    if not ok.any():
        return -np.inf, 0.0, False
    s_r = s_t - s_l
    if criterion == CRITERION_MSE:
        imp_l = sq_l - s_l * s_l / n_l
        imp_r = (sq_t - sq_l) - s_r * s_r / n_r
    else:
        imp_l = 2.0 * s_l * (n_l - s_l) / n_l
        imp_r = 2.0 * s_r * (n_r - s_r) / n_r
    gain = np.where(ok, parent - imp_l - imp_r, -np.inf)
    i = int(np.argmax(gain))
    return float(gain[i]), (values_f[present[i]] + values_f[present[i + 1]]) * 0.5, True


def _build_tree_numpy(codes, bin_values, n_bins, y, rows, feature_keys, n_sub, max_depth, min_leaf, criterion):
    n_feat = codes.shape[0]
    perm = np.empty(n_feat, np.int64)
    feature, threshold, left, right, value = [-1], [0.0], [-1], [-1], [0.0]
    stack = [(0, rows.copy(), 0)]
    while stack:
        node, idx, depth = stack.pop()
        n = idx.shape[0]
        y_node = y[idx]
        s_t = float(np.cumsum(y_node)[-1])
        sq_t = float(np.cumsum(y_node * y_node)[-1])
        value[node] = s_t / n
        if depth >= max_depth or n < 2 * min_leaf or y_node.min() == y_node.max():
            continue
        parent = _impurity_py(s_t, sq_t, float(n), criterion)
        _node_features_py(feature_keys[node], n_feat, n_sub, perm)
        best_gain, best_f, best_thr = -np.inf, -1, 0.0
        for j in range(n_feat):
            if j >= n_sub and best_f >= 0:
                break
            f = int(perm[j])
            if n_bins[f] < 2:
                continue
            g, thr, ok = _best_split_numpy(codes[f, idx], bin_values[f], n_bins[f], y_node, s_t, sq_t, parent,
                                           min_leaf, criterion)
            if ok and g > best_gain:
                best_gain, best_f, best_thr = g, f, thr
        if best_f < 0:
            continue
        go_left = bin_values[best_f, codes[best_f, idx]] <= best_thr
        lc, rc = len(feature), len(feature) + 1
        for lst, v in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1), (value, 0.0)):
            lst.extend((v, v))
        feature[node], threshold[node], left[node], right[node] = best_f, best_thr, lc, rc
        stack.append((rc, idx[~go_left], depth + 1))
        stack.append((lc, idx[go_left], depth + 1))
    return (np.asarray(feature, np.int64), np.asarray(threshold, np.float64), np.asarray(left, np.int64),
            np.asarray(right, np.int64), np.asarray(value, np.float64))


def _predict_forest_numpy(feature, threshold, left, right, value, roots, X):
    n = X.shape[0]
    acc = np.zeros(n)
    rows = np.arange(n)
    for root in roots:
        node = np.full(n, root, np.int64)
        active = feature[node] >= 0
        while active.any():
            nd = node[active]
            f = feature[nd]
            go_left = X[rows[active], f] <= threshold[nd]
            node[active] = np.where(go_left, left[nd], right[nd])
            active = feature[node] >= 0
        acc += value[node]
    return acc / len(roots)


# ------------------------------------------------------------------ dispatch

build_tree_numpy = _build_tree_numpy
predict_forest_numpy = _predict_forest_numpy

if HAVE_NUMBA:
    # resolved from module globals when the loop kernel compiles
    _impurity = numba.njit(cache=True)(_impurity_py)
    _node_features = numba.njit(cache=True)(_node_features_py)
    build_tree_numba = numba.njit(cache=True)(_build_tree_loops)
    predict_forest_numba = numba.njit(cache=True)(_predict_forest_loops)
else:  # pragma: no cover
    _impurity = _impurity_py
    _node_features = _node_features_py
    build_tree_numba = None
    predict_forest_numba = None

if USE_NUMBA:
    build_tree = build_tree_numba
    predict_forest = predict_forest_numba
else:
    if _DISABLED:
        logger.info("numba kernels disabled by DIRECTIVE_DSE_DISABLE_NUMBA")
    build_tree = build_tree_numpy
    predict_forest = predict_forest_numpy


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
