"""Compiled CART builder shared by the single tree and the forest.

Trees are stored as flat arrays (feature, threshold, left, right, value);
``feature == -1`` marks a leaf.  A forest is the concatenation of its
trees' arrays plus an offset table.

Randomness inside compiled code (bootstrap rows, per-node feature subsets)
comes from a splitmix64 stream seeded once per forest, so a fit is a pure
function of its inputs and seed.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _splitmix(state):
    # returns (new_state, output)
    state = state + np.uint64(0x9E3779B97F4A7C15)
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return state, z


@njit(cache=True)
def _below(state, k):
    # uniform integer in [0, k) from the top 53 bits
    state, z = _splitmix(state)
    u = (z >> np.uint64(11)) * (1.0 / 9007199254740992.0)
    r = np.int64(u * k)
    if r >= k:
        r = k - 1
    return state, r


@njit(cache=True, nogil=True)
def _grow(X, y, order, counts, mtry, min_leaf, min_split, max_depth, state,
          feature, threshold, left, right, value, base):
    """Grow one tree into the output arrays starting at ``base``.

    ``order[f]`` lists original rows sorted by feature ``f``; ``counts[r]``
    is how many times row ``r`` is in the training sample.  Each node owns
    the same contiguous segment of every per-feature sorted sample list, so
    no sorting happens below the root.  Returns (node_count, rng_state).
    """
    nrow, d = X.shape
    n = 0
    for r in range(nrow):
        n += counts[r]

    # sample slot -> original row, slots of one row are contiguous
    srow = np.empty(n, dtype=np.int64)
    first = np.empty(nrow, dtype=np.int64)
    p = 0
    for r in range(nrow):
        first[r] = p
        for c in range(counts[r]):
            srow[p] = r
            p += 1
    sidx = np.empty((d, n), dtype=np.int64)
    for f in range(d):
        p = 0
        for q in range(nrow):
            r = order[f, q]
            for c in range(counts[r]):
                sidx[f, p] = first[r] + c
                p += 1

    ys = np.empty(n)
    for p in range(n):
        ys[p] = y[srow[p]]
    goes_left = np.zeros(n, dtype=np.bool_)
    buf = np.empty(n, dtype=np.int64)
    perm = np.arange(d)
    feats = np.empty(d, dtype=np.int64)

    # explicit stack of (node, start, end, depth)
    st_node = np.empty(n + 1, dtype=np.int64)
    st_start = np.empty(n + 1, dtype=np.int64)
    st_end = np.empty(n + 1, dtype=np.int64)
    st_depth = np.empty(n + 1, dtype=np.int64)
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n
    st_depth[0] = 0
    top = 1
    count = 1

    while top > 0:
        top -= 1
        node = st_node[top]
        start = st_start[top]
        end = st_end[top]
        depth = st_depth[top]
        m = end - start

        s = 0.0
        for i in range(start, end):
            s += ys[sidx[0, i]]
        mean = s / m
        sse = 0.0
        for i in range(start, end):
            r = ys[sidx[0, i]] - mean
            sse += r * r

        k = base + node
        value[k] = mean
        feature[k] = -1
        threshold[k] = 0.0
        left[k] = -1
        right[k] = -1

        if m < min_split or depth >= max_depth or m < 2 * min_leaf:
            continue
        if sse <= 1e-12 * (s * s / m) or sse == 0.0:
            continue

        # candidate features, ascending so ties go to the lowest index
        if mtry >= d:
            nf = d
            for j in range(d):
                feats[j] = j
        else:
            nf = mtry
            for j in range(mtry):
                state, r = _below(state, d - j)
                t = perm[j]
                perm[j] = perm[j + r]
                perm[j + r] = t
            for j in range(mtry):
                feats[j] = perm[j]
            feats[:nf] = np.sort(feats[:nf])

        best_gain = 0.0
        best_f = -1
        best_cut = -1
        best_thr = 0.0
        base_term = s * s / m
        for jj in range(nf):
            f = feats[jj]
            sl = 0.0
            for i in range(start, start + min_leaf - 1):
                sl += ys[sidx[f, i]]
            for i in range(start + min_leaf - 1, end - min_leaf):
                sl += ys[sidx[f, i]]
                v0 = X[srow[sidx[f, i]], f]
                v1 = X[srow[sidx[f, i + 1]], f]
                if v0 == v1:
                    continue
                nl = i + 1 - start
                nr = m - nl
                sr = s - sl
                gain = sl * sl / nl + sr * sr / nr - base_term
                if gain > best_gain:
                    best_gain = gain
                    best_f = f
                    best_cut = i + 1
                    thr = 0.5 * (v0 + v1)
                    if thr >= v1:
                        thr = v0
                    best_thr = thr

        if best_f < 0 or best_gain <= 1e-12 * sse:
            continue

        mid = best_cut
        # leaf values are read through feature 0; other orderings are only
        # needed when a child may split again
        grow = depth + 1 < max_depth and (mid - start >= min_split or end - mid >= min_split)
        if grow or best_f != 0:
            for i in range(start, end):
                goes_left[sidx[best_f, i]] = i < mid
            for f in range(d):
                if f == best_f or (f != 0 and not grow):
                    continue
                a = start
                b = 0
                for i in range(start, end):
                    q = sidx[f, i]
                    if goes_left[q]:
                        sidx[f, a] = q
                        a += 1
                    else:
                        buf[b] = q
                        b += 1
                for i in range(b):
                    sidx[f, a + i] = buf[i]

        feature[k] = best_f
        threshold[k] = best_thr
        lnode = count
        rnode = count + 1
        count += 2
        left[k] = lnode
        right[k] = rnode

        st_node[top] = rnode
        st_start[top] = mid
        st_end[top] = end
        st_depth[top] = depth + 1
        top += 1
        st_node[top] = lnode
        st_start[top] = start
        st_end[top] = mid
        st_depth[top] = depth + 1
        top += 1

    return count, state


@njit(cache=True, nogil=True)
def grow_forest(X, y, ntree, mtry, min_leaf, min_split, max_depth, bootstrap, seed):
    """Grow ``ntree`` trees; returns packed arrays and per-tree offsets."""
    n, d = X.shape
    cap = 2 * n + 1
    total = ntree * cap
    feature = np.empty(total, dtype=np.int64)
    threshold = np.empty(total)
    left = np.empty(total, dtype=np.int64)
    right = np.empty(total, dtype=np.int64)
    value = np.empty(total)
    offsets = np.empty(ntree + 1, dtype=np.int64)

    order = np.empty((d, n), dtype=np.int64)
    for f in range(d):
        order[f] = np.argsort(X[:, f], kind="mergesort")

    state = np.uint64(seed)
    counts = np.empty(n, dtype=np.int64)
    pos = 0
    for t in range(ntree):
        if bootstrap:
            counts[:] = 0
            for i in range(n):
                state, r = _below(state, n)
                counts[r] += 1
        else:
            counts[:] = 1
        offsets[t] = pos
        cnt, state = _grow(X, y, order, counts, mtry, min_leaf, min_split, max_depth, state,
                           feature, threshold, left, right, value, pos)
        pos += cnt
    offsets[ntree] = pos
    return (feature[:pos].copy(), threshold[:pos].copy(), left[:pos].copy(),
            right[:pos].copy(), value[:pos].copy(), offsets)


@njit(cache=True, nogil=True)
def predict_trees(X, feature, threshold, left, right, value, offsets):
    """Per-tree predictions, shape (ntree, m)."""
    ntree = offsets.shape[0] - 1
    m = X.shape[0]
    out = np.empty((ntree, m))
    for t in range(ntree):
        base = offsets[t]
        for i in range(m):
            node = 0
            while feature[base + node] >= 0:
                k = base + node
                if X[i, feature[k]] <= threshold[k]:
                    node = left[k]
                else:
                    node = right[k]
            out[t, i] = value[base + node]
    return out
