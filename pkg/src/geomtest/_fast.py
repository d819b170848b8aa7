"""Numba kernels for the O(n^2) Prim minimum-spanning-tree construction.

Squared distances are used for all comparisons; ties on the frontier are
resolved by the smallest vertex index (argmin order), which makes the
returned tree deterministic for any input.
"""

import numba
import numpy as np


@numba.njit(cache=True)
def prim_mst(points):
    """Return (parent, child) index arrays of the n-1 undirected MST edges."""
    n, d = points.shape
    in_tree = np.zeros(n, numba.boolean)
    best = np.full(n, np.inf)
    parent = np.full(n, -1, np.int64)
    best[0] = 0.0
    src = np.empty(n - 1, np.int64)
    dst = np.empty(n - 1, np.int64)
    for step in range(n):
        v = -1
        bv = np.inf
        for i in range(n):
            if not in_tree[i] and best[i] < bv:
                bv = best[i]
                v = i
        in_tree[v] = True
        if step:
            src[step - 1] = parent[v]
            dst[step - 1] = v
        for i in range(n):
            if not in_tree[i]:
                s = 0.0
                for j in range(d):
                    t = points[i, j] - points[v, j]
                    s += t * t
                if s < best[i]:
                    best[i] = s
                    parent[i] = v
    return src, dst


@numba.njit(cache=True)
def prim_mst_periodic(points, side):
    """Prim MST under the flat-torus metric with period `side` per coordinate."""
    n, d = points.shape
    in_tree = np.zeros(n, numba.boolean)
    best = np.full(n, np.inf)
    parent = np.full(n, -1, np.int64)
    best[0] = 0.0
    src = np.empty(n - 1, np.int64)
    dst = np.empty(n - 1, np.int64)
    half = side / 2.0
    for step in range(n):
        v = -1
        bv = np.inf
        for i in range(n):
            if not in_tree[i] and best[i] < bv:
                bv = best[i]
                v = i
        in_tree[v] = True
        if step:
            src[step - 1] = parent[v]
            dst[step - 1] = v
        for i in range(n):
            if not in_tree[i]:
                s = 0.0
                for j in range(d):
                    t = abs(points[i, j] - points[v, j])
                    if t > half:
                        t = side - t
                    s += t * t
                if s < best[i]:
                    best[i] = s
                    parent[i] = v
    return src, dst
