"""Vietoris-Rips d-simplices of a point set and their adjacency structure.

Simplices are stored as strictly increasing tuples of point ids.  A face key
is the sorted tuple of ``d`` ids of a ``(d-1)``-face, so face adjacency and
the mod-2 boundary are pure combinatorics on ids.
"""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .geometry import EPS_GEO, batch_hull_distance, batch_is_degenerate, point_simplex_distance


class UnionFind:
    """Union-find over ``0..n-1`` with path halving and union by size."""

    def __init__(self, n: int = 0):
        self.parent = list(range(n))
        self.size = [1] * n

    def add(self) -> int:
        self.parent.append(len(self.parent))
        self.size.append(1)
        return len(self.parent) - 1

    def find(self, a: int) -> int:
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return ra

    def labels(self) -> np.ndarray:
        return np.array([self.find(i) for i in range(len(self.parent))], dtype=np.int64)


def unit_pairs(points, radius=1.0) -> np.ndarray:
    """Sorted array of id pairs ``i < j`` with ``|x_i - x_j| <= radius + EPS_GEO``."""
    points = np.asarray(points, dtype=float)
    if len(points) < 2:
        return np.zeros((0, 2), dtype=np.int64)
    pairs = cKDTree(points).query_pairs(radius + EPS_GEO, output_type="ndarray").astype(np.int64)
    if len(pairs) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    return pairs[np.lexsort(pairs.T[::-1])]


def higher_neighbors(n, pairs) -> list[list[int]]:
    nbrs = [[] for _ in range(n)]
    for i, j in pairs.tolist():
        nbrs[i].append(j)
    return nbrs


def _extend_cliques(nbrs, size):
    """Cliques of ``size`` vertices, extended by higher-id common neighbours."""
    out = []
    sets = [set(v) for v in nbrs]

    def grow(clique, cand):
        if len(clique) == size:
            out.append(tuple(clique))
            return
        for j in cand:
            grow(clique + [j], [k for k in cand if k > j and k in sets[j]])

    for i in range(len(nbrs)):
        grow([i], nbrs[i])
    return out


@dataclass(eq=False)
class SimplexTable:
    """The d-simplices of a point set, one sorted id tuple per row."""

    d: int
    simplices: np.ndarray
    points: np.ndarray
    n_degenerate: int = 0

    def __post_init__(self):
        self.simplices = np.asarray(self.simplices, dtype=np.int64).reshape(-1, self.d + 1)

    def __len__(self) -> int:
        return len(self.simplices)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def tuples(self, subset=None) -> list[tuple]:
        rows = self.simplices if subset is None else self.simplices[np.asarray(list(subset), dtype=np.int64)]
        return [tuple(r) for r in rows.tolist()]

    @cached_property
    def index(self) -> dict:
        return {t: i for i, t in enumerate(self.tuples())}

    def coords(self, i) -> np.ndarray:
        return self.points[self.simplices[i]]

    @cached_property
    def vertex_coords(self) -> np.ndarray:
        return self.points[self.simplices]

    @cached_property
    def max_norm(self) -> np.ndarray:
        """Largest vertex norm per simplex (the hull's farthest point from ``o``)."""
        if len(self) == 0:
            return np.zeros(0)
        return np.linalg.norm(self.vertex_coords, axis=2).max(axis=1)

    @cached_property
    def min_norm(self) -> np.ndarray:
        """Distance from the origin to each simplex hull."""
        if len(self) == 0:
            return np.zeros(0)
        V = self.vertex_coords
        if self.d <= 1 or self.dim == 2:
            o = np.zeros((len(self), self.dim))
            return batch_hull_distance(V, o[:, None, :])
        origin = np.zeros(self.dim)
        return np.array([point_simplex_distance(origin, v) for v in V])

    @cached_property
    def face_index(self) -> "FaceIndex":
        return build_face_index(self)

    def to_text(self) -> str:
        return "".join(" ".join(map(str, t)) + "\n" for t in self.tuples())

    @staticmethod
    def tuples_from_text(text: str) -> list[tuple]:
        return [tuple(int(v) for v in ln.split()) for ln in text.splitlines() if ln.strip()]


def enumerate_d_simplices(points, d: int, pairs=None) -> SimplexTable:
    """All ``(d+1)``-subsets of ``points`` with pairwise distances ``<= 1``.

    ``points`` may be a :class:`~faceperc.points.Realization` or an array.
    Cliques of the unit-distance graph are grown in increasing id order, so
    every simplex is produced exactly once.  For ``d >= 2`` affinely
    dependent vertex sets are dropped and counted in ``n_degenerate``.
    """
    pts = np.asarray(getattr(points, "points", points), dtype=float)
    if pts.ndim != 2:
        pts = pts.reshape(len(pts), -1)
    D = pts.shape[1]
    if d < 0 or d > D:
        raise ValueError(f"d must lie in 0..{D}, got {d}")
    n = len(pts)
    if d == 0:
        return SimplexTable(0, np.arange(n).reshape(-1, 1), pts)
    if pairs is None:
        pairs = unit_pairs(pts)
    if d == 1:
        return SimplexTable(1, pairs, pts)
    cliques = _extend_cliques(higher_neighbors(n, pairs), d + 1)
    cl = np.array(sorted(cliques), dtype=np.int64).reshape(-1, d + 1)
    bad = batch_is_degenerate(pts[cl]) if len(cl) else np.zeros(0, dtype=bool)
    table = SimplexTable(d, cl[~bad], pts, n_degenerate=int(bad.sum()))
    return table


def faces(simplex: tuple) -> list[tuple]:
    """The codimension-one faces of a sorted vertex tuple."""
    k = len(simplex)
    return [simplex[:i] + simplex[i + 1:] for i in range(k)]


@dataclass(eq=False)
class FaceIndex:
    incident: dict = field(default_factory=dict)

    def __eq__(self, other):
        return isinstance(other, FaceIndex) and self.incident == other.incident


def build_face_index(table: SimplexTable) -> FaceIndex:
    inc = defaultdict(list)
    for i, s in enumerate(table.tuples()):
        for f in faces(s):
            inc[f].append(i)
    return FaceIndex(dict(inc))


@dataclass(eq=False)
class AdjacencyGraph:
    n: int
    edges: np.ndarray
    mode: str = "face"

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        e = np.sort(e, axis=1)
        if len(e):
            e = np.unique(e, axis=0)
        self.edges = e

    def edge_set(self) -> set:
        return set(map(tuple, self.edges.tolist()))

    @cached_property
    def neighbors(self) -> list[list[int]]:
        nb = [[] for _ in range(self.n)]
        for a, b in self.edges.tolist():
            nb[a].append(b)
            nb[b].append(a)
        return nb


def face_adjacency(table: SimplexTable) -> AdjacencyGraph:
    """Edges between simplices sharing a (d-1)-face, found by face bucketing."""
    if table.d < 1:
        raise ValueError("face adjacency needs d >= 1")
    edges = []
    for inc in table.face_index.incident.values():
        edges.extend(combinations(inc, 2))
    return AdjacencyGraph(len(table), np.array(edges, dtype=np.int64).reshape(-1, 2), "face")


def face_cluster_labels(table: SimplexTable) -> np.ndarray:
    """Face-connected component label per simplex without building all edges."""
    uf = UnionFind(len(table))
    for inc in table.face_index.incident.values():
        first = inc[0]
        for other in inc[1:]:
            uf.union(first, other)
    return uf.labels()


def star_candidate_pairs(table: SimplexTable, r0: float) -> np.ndarray:
    """Simplex pairs whose centroids lie within ``r0 + 2d/(d+1)``.

    A simplex of diameter at most 1 lies within ``d/(d+1)`` of its centroid,
    so no pair at hull distance ``<= r0`` is lost.
    """
    if len(table) < 2:
        return np.zeros((0, 2), dtype=np.int64)
    cent = table.vertex_coords.mean(axis=1)
    return unit_pairs(cent, r0 + 2.0 * table.d / (table.d + 1) + 1e-6)


def _diameters(X):
    return np.linalg.norm(X[:, :, None, :] - X[:, None, :, :], axis=3).max(axis=(1, 2))


def _star_filter(table: SimplexTable, cand: np.ndarray, r0: float, chunk: int = 100_000) -> np.ndarray:
    """Subset of candidate pairs at hull distance ``<= r0``, in bounded memory."""
    V = table.vertex_coords
    diam = _diameters(V)
    keep = np.zeros(len(cand), dtype=bool)
    for lo in range(0, len(cand), chunk):
        c = cand[lo:lo + chunk]
        A, B = V[c[:, 0]], V[c[:, 1]]
        vdist = np.linalg.norm(A[:, :, None, :] - B[:, None, :, :], axis=3).min(axis=(1, 2))
        # vertex distance bounds the hull distance from above ...
        k = vdist <= r0 + EPS_GEO
        # ... and from below once both diameters are subtracted
        maybe = ~k & (vdist - diam[c[:, 0]] - diam[c[:, 1]] <= r0 + EPS_GEO)
        if np.any(maybe):
            idx = np.flatnonzero(maybe)
            k[idx] = batch_hull_distance(A[idx], B[idx]) <= r0 + EPS_GEO
        keep[lo:lo + chunk] = k
    return cand[keep]


def star_adjacency(table: SimplexTable, r0: float) -> AdjacencyGraph:
    """Edges between simplices whose hulls are within ``r0`` (plus EPS_GEO)."""
    if r0 <= 0:
        raise ValueError("r0 must be positive")
    cand = star_candidate_pairs(table, r0)
    return AdjacencyGraph(len(table), _star_filter(table, cand, r0), f"star({r0})")


def star_cluster_labels(table: SimplexTable, r0: float) -> np.ndarray:
    """Star-adjacency component labels without materialising every edge.

    Simplices with vertices within ``r0`` of each other are joined through a
    graph on their vertices first; exact hull distances are only computed for
    candidate pairs that this leaves in different components.
    """
    if r0 <= 0:
        raise ValueError("r0 must be positive")
    m = len(table)
    if m == 0:
        return np.zeros(0, dtype=np.int64)
    verts = np.unique(table.simplices)
    vpos = np.full(len(table.points), -1, dtype=np.int64)
    vpos[verts] = np.arange(len(verts)) + m
    own = np.column_stack([np.repeat(np.arange(m), table.d + 1), vpos[table.simplices.ravel()]])
    close = unit_pairs(table.points[verts], r0)
    edges = [own, close + m]
    n = m + len(verts)

    def label(es):
        e = np.concatenate(es)
        g = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
        return connected_components(g, directed=False)[1]

    lab = label(edges)[:m]
    sizes = np.bincount(lab)
    small = np.flatnonzero(lab != np.argmax(sizes))
    if len(small) == 0:
        return lab.astype(np.int64)
    # only pairs touching a simplex outside the largest component can merge
    cent = table.vertex_coords.mean(axis=1)
    rad = r0 + 2.0 * table.d / (table.d + 1) + 1e-6
    hits = cKDTree(cent).query_ball_point(cent[small], rad + EPS_GEO)
    cand = np.array([(i, j) for i, js in zip(small.tolist(), hits) for j in js
                     if lab[i] != lab[j]], dtype=np.int64).reshape(-1, 2)
    if len(cand):
        cand = np.unique(np.sort(cand, axis=1), axis=0)
    if len(cand):
        edges.append(_star_filter(table, cand, r0))
        lab = label(edges)[:m]
    return lab.astype(np.int64)


def boundary_mod2(simplices) -> set:
    """Faces incident to an odd number of the given simplices.

    ``simplices`` is an iterable of sorted vertex tuples; the result is a set
    of sorted face tuples.
    """
    counts = Counter()
    for s in simplices:
        counts.update(faces(tuple(s)))
    return {f for f, c in counts.items() if c % 2}


def is_cycle(simplices) -> bool:
    return not boundary_mod2(simplices)


def components(nodes, graph: AdjacencyGraph) -> list[list[int]]:
    """Connected components of the subgraph induced on ``nodes``."""
    nodes = sorted(set(int(v) for v in nodes))
    pos = {v: i for i, v in enumerate(nodes)}
    uf = UnionFind(len(nodes))
    for a, b in graph.edges.tolist():
        if a in pos and b in pos:
            uf.union(pos[a], pos[b])
    groups = defaultdict(list)
    for v in nodes:
        groups[uf.find(pos[v])].append(v)
    return sorted(groups.values(), key=lambda g: g[0])


face_components = components


def tuple_components(simplices) -> list[list[tuple]]:
    """Face-connected components of a family of sorted vertex tuples."""
    simplices = sorted(set(tuple(s) for s in simplices))
    pos = {s: i for i, s in enumerate(simplices)}
    uf = UnionFind(len(simplices))
    bucket = {}
    for s in simplices:
        for f in faces(s):
            if f in bucket:
                uf.union(pos[s], bucket[f])
            else:
                bucket[f] = pos[s]
    groups = defaultdict(list)
    for s in simplices:
        groups[uf.find(pos[s])].append(s)
    return sorted(groups.values())
