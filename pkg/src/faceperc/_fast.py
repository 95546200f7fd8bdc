"""Compiled inner loops for the d = 1 hot paths.

For ``d = 1`` face adjacency of edges is "shares an endpoint", so a face
cluster is the edge set of a connected component of the unit-distance graph.
The kernels below exploit that and never materialise simplices.
"""
import numpy as np
from numba import njit

from .geometry import EPS_GEO

_R2 = (1.0 + EPS_GEO) ** 2


@njit(cache=True)
def origin_reach_d1(points):
    """Largest norm in the unit-distance cluster of the origin.

    ``points`` excludes the origin itself.  Returns ``-1.0`` when the origin
    has no neighbour, i.e. it is a vertex of no 1-simplex.
    """
    n = points.shape[0]
    D = points.shape[1]
    seen = np.zeros(n, dtype=np.bool_)
    stack = np.empty(n, dtype=np.int64)
    top = 0
    for i in range(n):
        s = 0.0
        for k in range(D):
            s += points[i, k] * points[i, k]
        if s <= _R2:
            seen[i] = True
            stack[top] = i
            top += 1
    if top == 0:
        return -1.0
    best = 0.0
    while top > 0:
        top -= 1
        i = stack[top]
        s = 0.0
        for k in range(D):
            s += points[i, k] * points[i, k]
        if s > best:
            best = s
        for j in range(n):
            if not seen[j]:
                s = 0.0
                for k in range(D):
                    t = points[i, k] - points[j, k]
                    s += t * t
                if s <= _R2:
                    seen[j] = True
                    stack[top] = j
                    top += 1
    return np.sqrt(best)


@njit(cache=True)
def reach_edit_d1(base, center, half, extra):
    """:func:`origin_reach_d1` after replacing the box ``center +- half`` by ``extra``."""
    n = base.shape[0]
    D = base.shape[1]
    m = extra.shape[0]
    pts = np.empty((n + m, D))
    k = 0
    for i in range(n):
        inside = True
        for j in range(D):
            if abs(base[i, j] - center[j]) > half:
                inside = False
                break
        if not inside:
            for j in range(D):
                pts[k, j] = base[i, j]
            k += 1
    for i in range(m):
        for j in range(D):
            pts[k, j] = extra[i, j]
        k += 1
    return origin_reach_d1(pts[:k])


@njit(cache=True)
def reach_add_d1(base, extra):
    """:func:`origin_reach_d1` of ``base`` plus the rows of ``extra``."""
    n = base.shape[0]
    D = base.shape[1]
    m = extra.shape[0]
    pts = np.empty((n + m, D))
    pts[:n] = base
    pts[n:] = extra
    return origin_reach_d1(pts)
