"""Compiled kernels for growing and evaluating CART regression trees.

Trees are stored as flat node arrays.  ``left[i] == -1`` marks a leaf whose
prediction is ``value[i]``; internal nodes send a row left when
``x[feature] <= threshold``.
"""

import numpy as np
from numba import njit

LEAF = -1


@njit(cache=True)
def grow_tree(x, y, presorted, sample, uniforms, mtry, min_leaf, max_depth):
    """Grow one tree on the rows listed in ``sample`` (duplicates allowed).

    ``presorted[f]`` is the argsort of ``x[:, f]`` over all training rows,
    shared by every tree of a forest.

    ``uniforms`` supplies the U(0, 1) draws used for per-node feature
    sampling (``mtry`` per split attempt, consumed in order).  A negative
    ``max_depth`` means unlimited.

    Every feature keeps the node's sample positions in sorted order; a split
    stably partitions those orders, so no node ever re-sorts.
    """
    n = sample.shape[0]
    k = x.shape[1]
    cap = 2 * n + 1
    feature = np.full(cap, LEAF, dtype=np.int32)
    threshold = np.zeros(cap, dtype=np.float64)
    left = np.full(cap, LEAF, dtype=np.int32)
    right = np.full(cap, LEAF, dtype=np.int32)
    value = np.zeros(cap, dtype=np.float64)

    xs = np.empty((k, n), dtype=np.float64)
    ys = np.empty(n, dtype=np.float64)
    for p in range(n):
        ys[p] = y[sample[p]]
        for f in range(k):
            xs[f, p] = x[sample[p], f]
    # group sample positions by training row, then read them off in
    # presorted row order
    n_rows = x.shape[0]
    row_start = np.zeros(n_rows + 1, dtype=np.int64)
    for p in range(n):
        row_start[sample[p] + 1] += 1
    for r in range(n_rows):
        row_start[r + 1] += row_start[r]
    fill = row_start[:-1].copy()
    by_row = np.empty(n, dtype=np.int64)
    for p in range(n):
        r = sample[p]
        by_row[fill[r]] = p
        fill[r] += 1
    order = np.empty((k, n), dtype=np.int64)
    for f in range(k):
        a = 0
        for r in presorted[f]:
            for q in range(row_start[r], row_start[r + 1]):
                order[f, a] = by_row[q]
                a += 1
    goes_left = np.zeros(n, dtype=np.bool_)
    buf = np.empty(n, dtype=np.int64)

    # stack of (node, start, end, depth)
    stack = np.empty((cap, 4), dtype=np.int64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    stack[0, 3] = 0
    top = 1
    n_nodes = 1
    u_pos = 0
    perm = np.arange(k)
    chosen = np.empty(mtry, dtype=np.int64)

    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]
        m = end - start

        total = 0.0
        ymin = np.inf
        ymax = -np.inf
        for i in range(start, end):
            yi = ys[order[0, i]]
            total += yi
            if yi < ymin:
                ymin = yi
            if yi > ymax:
                ymax = yi
        value[node] = total / m

        if m < 2 * min_leaf or ymin == ymax or (max_depth >= 0 and depth >= max_depth):
            continue

        # partial Fisher-Yates draw of mtry distinct features
        for j in range(k):
            perm[j] = j
        for j in range(mtry):
            r = j + int(uniforms[u_pos] * (k - j))
            u_pos += 1
            if r >= k:
                r = k - 1
            tmp = perm[j]
            perm[j] = perm[r]
            perm[r] = tmp
            chosen[j] = perm[j]
        chosen[:mtry].sort()

        best_score = -np.inf
        best_feat = -1
        best_thr = 0.0
        for c in range(mtry):
            f = chosen[c]
            cum = 0.0
            for i in range(m - 1):
                pos = order[f, start + i]
                cum += ys[pos]
                n_left = i + 1
                if n_left < min_leaf:
                    continue
                if m - n_left < min_leaf:
                    break
                lo = xs[f, pos]
                hi = xs[f, order[f, start + i + 1]]
                if lo == hi:
                    continue
                rest = total - cum
                score = cum * cum / n_left + rest * rest / (m - n_left)
                if score > best_score:
                    best_score = score
                    best_feat = f
                    best_thr = 0.5 * (lo + hi)
                    if best_thr == hi:
                        best_thr = lo

        # no admissible split improves on the parent
        if best_feat < 0 or best_score <= total * total / m:
            continue

        n_left_final = 0
        for i in range(start, end):
            pos = order[best_feat, i]
            flag = xs[best_feat, pos] <= best_thr
            goes_left[pos] = flag
            if flag:
                n_left_final += 1
        mid = start + n_left_final
        for f in range(k):
            a = start
            b = 0
            for i in range(start, end):
                pos = order[f, i]
                if goes_left[pos]:
                    order[f, a] = pos
                    a += 1
                else:
                    buf[b] = pos
                    b += 1
            for i in range(b):
                order[f, mid + i] = buf[i]

        feature[node] = best_feat
        threshold[node] = best_thr
        lchild = n_nodes
        rchild = n_nodes + 1
        n_nodes += 2
        left[node] = lchild
        right[node] = rchild
        stack[top, 0] = rchild
        stack[top, 1] = mid
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = lchild
        stack[top, 1] = start
        stack[top, 2] = mid
        stack[top, 3] = depth + 1
        top += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(),
            left[:n_nodes].copy(), right[:n_nodes].copy(),
            value[:n_nodes].copy())


@njit(cache=True)
def predict_packed(x, roots, feature, threshold, left, right, value):
    """Average the predictions of all packed trees for every row of ``x``."""
    n = x.shape[0]
    n_trees = roots.shape[0]
    out = np.zeros(n, dtype=np.float64)
    for t in range(n_trees):
        root = roots[t]
        for i in range(n):
            node = root
            while left[node] != LEAF:
                if x[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[i] += value[node]
    for i in range(n):
        out[i] /= n_trees
    return out
