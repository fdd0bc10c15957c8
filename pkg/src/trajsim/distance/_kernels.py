"""Numba kernels for the quadratic dynamic programs.

All kernels take C-contiguous ``(n, 2)`` float64 arrays and use the same
point cost, ``sqrt(dx*dx + dy*dy)``, so values agree bit-for-bit between the
single-pair, windowed and batched entry points. ``fastmath`` stays off: the
exactness tests depend on IEEE evaluation order.
"""

import math

import numba
import numpy as np

_jit = numba.njit(cache=True, nogil=True)

MEASURE_DTW = 1
MEASURE_HAUSDORFF = 2
MEASURE_FRECHET = 3


@_jit
def point_dist(ax, ay, bx, by):
    dx = ax - bx
    dy = ay - by
    return math.sqrt(dx * dx + dy * dy)


@_jit
def dtw_value(a, b):
    # Rolling rows over the shorter sequence; transposing the grid does not
    # change any cell value because the point cost is symmetric.
    if b.shape[0] > a.shape[0]:
        a, b = b, a
    n = a.shape[0]
    m = b.shape[0]
    prev = np.empty(m)
    cur = np.empty(m)
    for j in range(m):
        c = point_dist(a[0, 0], a[0, 1], b[j, 0], b[j, 1])
        prev[j] = c if j == 0 else c + prev[j - 1]
    for i in range(1, n):
        cur[0] = point_dist(a[i, 0], a[i, 1], b[0, 0], b[0, 1]) + prev[0]
        for j in range(1, m):
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = point_dist(a[i, 0], a[i, 1], b[j, 0], b[j, 1]) + best
        prev, cur = cur, prev
    return prev[m - 1]


@_jit
def dtw_grid(a, b):
    """Full accumulated-cost grid ``D`` with ``D[i, j]`` for prefixes ending at (i, j)."""
    n = a.shape[0]
    m = b.shape[0]
    D = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            c = point_dist(a[i, 0], a[i, 1], b[j, 0], b[j, 1])
            if i == 0 and j == 0:
                D[i, j] = c
            elif i == 0:
                D[i, j] = c + D[i, j - 1]
            elif j == 0:
                D[i, j] = c + D[i - 1, j]
            else:
                best = D[i - 1, j - 1]
                if D[i - 1, j] < best:
                    best = D[i - 1, j]
                if D[i, j - 1] < best:
                    best = D[i, j - 1]
                D[i, j] = c + best
    return D


@_jit
def frechet_value(a, b):
    if b.shape[0] > a.shape[0]:
        a, b = b, a
    n = a.shape[0]
    m = b.shape[0]
    prev = np.empty(m)
    cur = np.empty(m)
    for j in range(m):
        c = point_dist(a[0, 0], a[0, 1], b[j, 0], b[j, 1])
        if j > 0 and prev[j - 1] > c:
            c = prev[j - 1]
        prev[j] = c
    for i in range(1, n):
        c = point_dist(a[i, 0], a[i, 1], b[0, 0], b[0, 1])
        cur[0] = c if c > prev[0] else prev[0]
        for j in range(1, m):
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            c = point_dist(a[i, 0], a[i, 1], b[j, 0], b[j, 1])
            cur[j] = c if c > best else best
        prev, cur = cur, prev
    return prev[m - 1]


@_jit
def _directed_hausdorff(a, b):
    cmax = 0.0
    for i in range(a.shape[0]):
        cmin = np.inf
        for j in range(b.shape[0]):
            d = point_dist(a[i, 0], a[i, 1], b[j, 0], b[j, 1])
            if d < cmin:
                cmin = d
        if cmin > cmax:
            cmax = cmin
    return cmax


@_jit
def hausdorff_value(a, b):
    h1 = _directed_hausdorff(a, b)
    h2 = _directed_hausdorff(b, a)
    return h1 if h1 > h2 else h2


@_jit
def _directed_hausdorff_eb(a, b, order_a, order_b):
    # The inner scan stops as soon as some point of b is closer than the
    # running maximum: that outer point can no longer raise it.
    cmax = 0.0
    count = 0
    for ii in range(order_a.shape[0]):
        i = order_a[ii]
        cmin = np.inf
        broke = False
        for jj in range(order_b.shape[0]):
            j = order_b[jj]
            d = point_dist(a[i, 0], a[i, 1], b[j, 0], b[j, 1])
            count += 1
            if d < cmax:
                broke = True
                break
            if d < cmin:
                cmin = d
        if not broke and cmin > cmax:
            cmax = cmin
    return cmax, count


@_jit
def hausdorff_eb_value(a, b, order_a, order_b):
    h1, c1 = _directed_hausdorff_eb(a, b, order_a, order_b)
    h2, c2 = _directed_hausdorff_eb(b, a, order_b, order_a)
    return (h1 if h1 > h2 else h2), c1 + c2


@_jit
def greedy_frechet_value(a, b):
    n = a.shape[0]
    m = b.shape[0]
    i = 0
    j = 0
    worst = point_dist(a[0, 0], a[0, 1], b[0, 0], b[0, 1])
    while i < n - 1 or j < m - 1:
        best = np.inf
        move = -1
        # 0: diagonal, 1: advance a, 2: advance b; strict '<' keeps the
        # earlier candidate on ties, so the diagonal wins first.
        if i < n - 1 and j < m - 1:
            best = point_dist(a[i + 1, 0], a[i + 1, 1], b[j + 1, 0], b[j + 1, 1])
            move = 0
        a_first = (n - 1 - i) >= (m - 1 - j)
        for k in range(2):
            cand = 1 if (k == 0) == a_first else 2
            if cand == 1 and i < n - 1:
                d = point_dist(a[i + 1, 0], a[i + 1, 1], b[j, 0], b[j, 1])
            elif cand == 2 and j < m - 1:
                d = point_dist(a[i, 0], a[i, 1], b[j + 1, 0], b[j + 1, 1])
            else:
                continue
            if d < best:
                best = d
                move = cand
        if move == 0:
            i += 1
            j += 1
        elif move == 1:
            i += 1
        else:
            j += 1
        if best > worst:
            worst = best
    return worst


@_jit
def windowed_dtw(a, b, lo, hi):
    """DTW restricted to cells ``lo[i] <= j <= hi[i]`` of each row ``i``.

    Storage is compact (one slab per row). Returns the cost and the optimal
    path as an ``(L, 2)`` index array from (0, 0) to (n-1, m-1).
    """
    n = a.shape[0]
    offs = np.empty(n + 1, dtype=np.int64)
    offs[0] = 0
    for i in range(n):
        offs[i + 1] = offs[i] + (hi[i] - lo[i] + 1)
    D = np.full(offs[n], np.inf)
    for i in range(n):
        for j in range(lo[i], hi[i] + 1):
            c = point_dist(a[i, 0], a[i, 1], b[j, 0], b[j, 1])
            if i == 0 and j == 0:
                D[offs[i]] = c
                continue
            best = np.inf
            if i > 0 and lo[i - 1] <= j - 1 <= hi[i - 1]:
                best = D[offs[i - 1] + j - 1 - lo[i - 1]]
            if i > 0 and lo[i - 1] <= j <= hi[i - 1]:
                v = D[offs[i - 1] + j - lo[i - 1]]
                if v < best:
                    best = v
            if j - 1 >= lo[i]:
                v = D[offs[i] + j - 1 - lo[i]]
                if v < best:
                    best = v
            D[offs[i] + j - lo[i]] = c + best
    cost = D[offs[n - 1] + hi[n - 1] - lo[n - 1]]
    # Backtrack, preferring the diagonal on ties.
    m = b.shape[0]
    path = np.empty((n + m, 2), dtype=np.int64)
    k = 0
    i = n - 1
    j = m - 1
    path[k, 0] = i
    path[k, 1] = j
    k += 1
    while i > 0 or j > 0:
        best = np.inf
        bi = -1
        bj = -1
        if i > 0 and j > 0 and lo[i - 1] <= j - 1 <= hi[i - 1]:
            best = D[offs[i - 1] + j - 1 - lo[i - 1]]
            bi = i - 1
            bj = j - 1
        if i > 0 and lo[i - 1] <= j <= hi[i - 1]:
            v = D[offs[i - 1] + j - lo[i - 1]]
            if v < best:
                best = v
                bi = i - 1
                bj = j
        if j > 0 and j - 1 >= lo[i]:
            v = D[offs[i] + j - 1 - lo[i]]
            if v < best:
                best = v
                bi = i
                bj = j - 1
        i = bi
        j = bj
        path[k, 0] = i
        path[k, 1] = j
        k += 1
    out = np.empty((k, 2), dtype=np.int64)
    for t in range(k):
        out[t, 0] = path[k - 1 - t, 0]
        out[t, 1] = path[k - 1 - t, 1]
    return cost, out


@_jit
def pair_value(a, b, measure):
    if measure == MEASURE_DTW:
        return dtw_value(a, b)
    if measure == MEASURE_HAUSDORFF:
        return hausdorff_value(a, b)
    return frechet_value(a, b)


@_jit
def distances_to_many(q, flat, offsets, targets, measure, out):
    """``out[k] = d(q, traj[targets[k]])`` with trajectories packed in ``flat``."""
    for k in range(targets.shape[0]):
        t = targets[k]
        out[k] = pair_value(q, flat[offsets[t]:offsets[t + 1]], measure)


def pack(point_arrays):
    """Concatenate point arrays into one buffer plus an offsets vector."""
    lengths = np.array([p.shape[0] for p in point_arrays], dtype=np.int64)
    offsets = np.zeros(len(point_arrays) + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    if point_arrays:
        flat = np.ascontiguousarray(np.concatenate(point_arrays, axis=0), dtype=np.float64)
    else:
        flat = np.empty((0, 2))
    return flat, offsets
