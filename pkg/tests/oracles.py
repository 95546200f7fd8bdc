"""Brute-force reference implementations shared by the tests."""
from collections import deque
from itertools import combinations

import numpy as np

from faceperc.geometry import EPS_GEO, is_degenerate, simplex_simplex_distance


def simplices_bruteforce(pts, d):
    out = []
    for c in combinations(range(len(pts)), d + 1):
        P = pts[list(c)]
        if all(np.linalg.norm(P[a] - P[b]) <= 1 + EPS_GEO for a, b in combinations(range(d + 1), 2)):
            if not is_degenerate(P):
                out.append(c)
    return out


def face_edges_bruteforce(simps):
    return {(i, j) for i, j in combinations(range(len(simps)), 2)
            if len(set(simps[i]) & set(simps[j])) == len(simps[i]) - 1}


def star_edges_bruteforce(pts, simps, r0):
    return {(i, j) for i, j in combinations(range(len(simps)), 2)
            if simplex_simplex_distance(pts[list(simps[i])], pts[list(simps[j])]) <= r0 + EPS_GEO}


def bfs_components(n, edges):
    nb = [[] for _ in range(n)]
    for a, b in edges:
        nb[a].append(b)
        nb[b].append(a)
    seen, comps = [False] * n, []
    for s in range(n):
        if seen[s]:
            continue
        seen[s] = True
        comp, q = [], deque([s])
        while q:
            u = q.popleft()
            comp.append(u)
            for v in nb[u]:
                if not seen[v]:
                    seen[v] = True
                    q.append(v)
        comps.append(sorted(comp))
    return sorted(comps)


def crossing_bruteforce(pts, d, n, mode="face", r0=None):
    """Crossing decided from scratch: all simplices, all pairs, BFS."""
    simps = simplices_bruteforce(pts, d)
    if not simps:
        return 0
    edges = face_edges_bruteforce(simps) if mode == "face" else star_edges_bruteforce(pts, simps, r0)
    norms = np.linalg.norm(pts, axis=1)
    o = np.zeros(pts.shape[1])
    from faceperc.geometry import point_simplex_distance
    for comp in bfs_components(len(simps), edges):
        start = any(point_simplex_distance(o, pts[list(simps[i])]) <= 1 + EPS_GEO for i in comp)
        reach = any(norms[list(simps[i])].max() >= n - EPS_GEO for i in comp)
        if start and reach:
            return 1
    return 0


def origin_reach_bruteforce(pts, r):
    """d = 1: BFS in the unit-distance graph from the origin."""
    allp = np.vstack([pts, np.zeros((1, pts.shape[1]))])
    o = len(pts)
    dist = np.linalg.norm(allp[:, None] - allp[None], axis=2)
    adj = dist <= 1 + EPS_GEO
    seen = {o}
    q = deque([o])
    while q:
        u = q.popleft()
        for v in np.flatnonzero(adj[u]):
            if v not in seen:
                seen.add(int(v))
                q.append(int(v))
    if len(seen) == 1:
        return 0
    return int(max(np.linalg.norm(allp[list(seen)], axis=1)) >= r - EPS_GEO)


def random_connected_subset(cx, rng, size):
    interior = set(range(len(cx))) - set(cx.hull_simplices.tolist())
    start = int(rng.choice(sorted(interior)))
    M, frontier = {start}, [start]
    while len(M) < size and frontier:
        u = frontier[int(rng.integers(len(frontier)))]
        nb = [v for v in cx.neighbors[u] if v not in M and v in interior]
        if not nb:
            frontier.remove(u)
            continue
        v = int(rng.choice(nb))
        M.add(v)
        frontier.append(v)
    return sorted(M)
