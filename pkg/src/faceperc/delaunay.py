"""Delaunay tessellations, vacancy, v-adjacency and outer simplex boundaries.

The triangulation is built by Bowyer-Watson insertion into a large enclosing
simplex.  A point is "inside" a circumball only when strictly inside by a
relative margin; near-ties (co-spherical configurations) are counted in
``n_ties`` and resolved as "outside", which always yields a valid Delaunay
triangulation of the perturbed configuration.
"""
from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from .geometry import (EPS_GEO, batch_hull_distance, point_segment_distances,
                       point_simplex_distance, segment_clear_of_balls)
from .points import Region
from .rips import boundary_mod2, faces, tuple_components

VACANCY_RADIUS = 0.5
_TIE = 1e-10


@dataclass(eq=False)
class DelaunayComplex:
    points: np.ndarray
    simplices: np.ndarray
    centers: np.ndarray
    radii: np.ndarray
    n_ties: int = 0
    perturbed: tuple = ()

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return len(self.simplices)

    def tuples(self, ids=None) -> list[tuple]:
        rows = self.simplices if ids is None else self.simplices[np.asarray(list(ids), dtype=np.int64)]
        return [tuple(r) for r in rows.tolist()]

    @cached_property
    def facet_map(self) -> dict:
        """Facet key -> incident simplex ids (two for interior, one for hull facets)."""
        inc = defaultdict(list)
        for i, s in enumerate(self.tuples()):
            for f in faces(s):
                inc[f].append(i)
        return dict(inc)

    @cached_property
    def facet_adjacency(self) -> np.ndarray:
        pairs = [v for v in self.facet_map.values() if len(v) == 2]
        return np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)

    @cached_property
    def neighbors(self) -> list[list[int]]:
        nb = [[] for _ in range(len(self))]
        for a, b in self.facet_adjacency.tolist():
            nb[a].append(b)
            nb[b].append(a)
        return nb

    @cached_property
    def hull_simplices(self) -> np.ndarray:
        ids = sorted({v[0] for v in self.facet_map.values() if len(v) == 1})
        return np.array(ids, dtype=np.int64)

    def shared_facet(self, a: int, b: int):
        sa, sb = set(self.simplices[a].tolist()), set(self.simplices[b].tolist())
        common = sa & sb
        if len(common) != self.dim:
            return None
        return tuple(sorted(common))

    def to_text(self) -> str:
        lines = [f"# D={self.dim} simplices={len(self)} ties={self.n_ties}"]
        for s, c, r in zip(self.simplices.tolist(), self.centers, self.radii):
            lines.append(" ".join(map(str, s)) + " | " + " ".join(f"{v:.12f}" for v in c) + f" | {r:.12f}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str, points) -> "DelaunayComplex":
        sims, cen, rad = [], [], []
        for ln in text.splitlines():
            if not ln.strip() or ln.startswith("#"):
                continue
            a, b, c = ln.split("|")
            sims.append([int(v) for v in a.split()])
            cen.append([float(v) for v in b.split()])
            rad.append(float(c))
        pts = np.asarray(points, dtype=float)
        D = pts.shape[1]
        return DelaunayComplex(pts, np.array(sims, dtype=np.int64).reshape(-1, D + 1),
                               np.array(cen).reshape(-1, D), np.array(rad))


def _circum(P):
    """Circumcenters and squared radii of a stack of ``(D+1, D)`` simplices."""
    E = P[:, 1:] - P[:, :1]
    rhs = 0.5 * np.einsum("mij,mij->mi", E, E)
    c = np.linalg.solve(E, rhs[..., None])[..., 0]
    return P[:, 0] + c, np.einsum("mi,mi->m", c, c)


def _volumes(P):
    E = P[:, 1:] - P[:, :1]
    return np.abs(np.linalg.det(E))


def delaunay(real, allow_3d: bool = False) -> DelaunayComplex:
    """Bowyer-Watson Delaunay triangulation of a Realization or point array."""
    pts = np.array(getattr(real, "points", real), dtype=float)
    n, D = pts.shape
    if D == 3 and not allow_3d:
        raise NotImplementedError("D = 3 triangulation is gated; pass allow_3d=True")
    if D not in (2, 3):
        raise NotImplementedError("Delaunay is implemented for D in {2, 3}")
    if n < D + 1:
        raise ValueError(f"need at least {D + 1} points, got {n}")
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    center = 0.5 * (lo + hi)
    span = max(float(np.max(hi - lo)), 1.0)
    S = 1e4 * span
    base = center - S
    sup = np.vstack([base, base + S * (D + 2) * np.eye(D)])
    P = np.vstack([pts, sup])
    ids_sup = np.arange(n, n + D + 1)

    simp = [tuple(ids_sup.tolist())]
    cc, r2 = _circum(P[np.array(simp)])
    cen = list(cc)
    rr = list(r2)
    alive = [True]
    ties = 0
    perturbed = []
    for p in range(n):
        x = P[p]
        C = np.asarray(cen)
        R = np.asarray(rr)
        live = np.asarray(alive)
        d2 = np.einsum("ij,ij->i", C - x, C - x)
        gap = R - d2
        bad = live & (gap > _TIE * R)
        ties += int(np.count_nonzero(live & (np.abs(gap) <= _TIE * R)))
        bad_ids = np.flatnonzero(bad)
        cnt = defaultdict(int)
        for i in bad_ids.tolist():
            for f in faces(simp[i]):
                cnt[f] += 1
        rim = [f for f, c in cnt.items() if c == 1]
        new = np.array([tuple(sorted(f + (p,))) for f in rim], dtype=np.int64)
        vol = _volumes(P[new])
        if np.any(vol <= 1e-14 * span ** D):
            # a flat cavity simplex: nudge the point deterministically and retry
            perturbed.append(p)
            P[p] = x + 1e-9 * span * np.cos(np.arange(1, D + 1) * (p + 1))
            pts[p] = P[p]
            return _retry(pts, perturbed, allow_3d)
        for i in bad_ids.tolist():
            alive[i] = False
        c2, q2 = _circum(P[new])
        for s, c, q in zip(new.tolist(), c2, q2):
            simp.append(tuple(s))
            cen.append(c)
            rr.append(q)
            alive.append(True)
    keep = [i for i, s in enumerate(simp) if alive[i] and max(s) < n]
    S_arr = np.array([simp[i] for i in keep], dtype=np.int64).reshape(-1, D + 1)
    order = np.lexsort(S_arr.T[::-1])
    S_arr = S_arr[order]
    cc, q = _circum(pts[S_arr])
    return DelaunayComplex(pts, S_arr, cc, np.sqrt(q), ties, tuple(perturbed))


def _retry(pts, perturbed, allow_3d):
    cx = delaunay(pts, allow_3d)
    cx.perturbed = tuple(sorted(set(perturbed) | set(cx.perturbed)))
    return cx


def empty_circumball_violations(cx: DelaunayComplex, tol: float = 1e-9) -> int:
    """Number of (simplex, point) pairs with the point strictly inside the circumball."""
    tree = cKDTree(cx.points)
    bad = 0
    for s, c, r in zip(cx.simplices, cx.centers, cx.radii):
        inside = tree.query_ball_point(c, max(r - tol, 0.0))
        bad += len(set(inside) - set(s.tolist()))
    return bad


# ---------------------------------------------------------------------------
# vacancy and v-adjacency


def _coords(real):
    return np.asarray(getattr(real, "points", real), dtype=float)


def vacancy_flags(cx: DelaunayComplex, real=None) -> np.ndarray:
    """Vacant iff the circumcenter is farther than 1/2 from every sample point."""
    pts = cx.points if real is None else _coords(real)
    if len(cx) == 0:
        return np.zeros(0, dtype=bool)
    dist, _ = cKDTree(pts).query(cx.centers)
    return dist > VACANCY_RADIUS


def v_adjacent(cx: DelaunayComplex, real, a: int, b: int) -> bool:
    if cx.shared_facet(a, b) is None:
        raise ValueError(f"simplices {a} and {b} are not facet-adjacent")
    pts = cx.points if real is None else _coords(real)
    return segment_clear_of_balls(cx.centers[a], cx.centers[b], pts, VACANCY_RADIUS)


def v_adjacent_pairs(cx: DelaunayComplex, real=None) -> np.ndarray:
    """All v-adjacent facet-adjacent pairs, found through a KD-tree prefilter."""
    pts = cx.points if real is None else _coords(real)
    vac = vacancy_flags(cx, pts)
    adj = cx.facet_adjacency
    adj = adj[vac[adj[:, 0]] & vac[adj[:, 1]]] if len(adj) else adj
    if len(adj) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    tree = cKDTree(pts)
    keep = np.zeros(len(adj), dtype=bool)
    for k, (a, b) in enumerate(adj.tolist()):
        u, v = cx.centers[a], cx.centers[b]
        mid = 0.5 * (u + v)
        near = tree.query_ball_point(mid, 0.5 * np.linalg.norm(u - v) + VACANCY_RADIUS + 1e-9)
        keep[k] = not near or bool(np.min(point_segment_distances(pts[near], u, v)) > VACANCY_RADIUS)
    return adj[keep]


# ---------------------------------------------------------------------------
# growth from the axis


@dataclass
class KGrowth:
    K0: list
    K: list
    order: list
    parent: dict = field(default_factory=dict)
    axis: tuple = (0.0, 0.0)
    axis_escapes: bool = False


def axis_interval(region: Region) -> tuple[float, float]:
    """Parameter range of the last coordinate axis inside a centered window."""
    c = np.asarray(region.center, dtype=float)
    if region.kind == "ball":
        off = np.linalg.norm(c[:-1])
        if off > region.radius:
            return (0.0, 0.0)
        h = np.sqrt(region.radius ** 2 - off ** 2)
        return (c[-1] - h, c[-1] + h)
    h = region.half_widths[-1]
    return (c[-1] - h, c[-1] + h)


def simplices_meeting_axis(cx: DelaunayComplex, t0: float, t1: float) -> list[int]:
    """Simplices whose hull meets ``{t e_D : t0 <= t <= t1}``.

    Barycentric coordinates of ``t e_D`` are affine in ``t``; the admissible
    ``t`` form an interval which is intersected with ``[t0, t1]``.
    """
    D = cx.dim
    out = []
    e = np.zeros(D)
    e[-1] = 1.0
    for i, s in enumerate(cx.simplices):
        V = cx.points[s]
        T = (V[1:] - V[0]).T
        try:
            Ti = np.linalg.inv(T)
        except np.linalg.LinAlgError:
            continue
        a = Ti @ (-V[0])
        b = Ti @ e
        # full barycentrics: (1 - sum(l), l), each affine alpha + beta t
        alpha = np.concatenate([[1 - a.sum()], a])
        beta = np.concatenate([[-b.sum()], b])
        lo, hi = t0, t1
        for al, be in zip(alpha, beta):
            if abs(be) < 1e-15:
                if al < -1e-12:
                    lo, hi = 1.0, 0.0
                    break
                continue
            t = (-1e-12 - al) / be
            if be > 0:
                lo = max(lo, t)
            else:
                hi = min(hi, t)
        if lo <= hi:
            out.append(i)
    return out


def grow_K(cx: DelaunayComplex, real=None, window: Region | None = None) -> KGrowth:
    """K0 from the windowed axis, then breadth-first closure under v-adjacency."""
    if window is None:
        window = getattr(real, "region", None)
    if window is None:
        raise ValueError("grow_K needs a window")
    t0, t1 = axis_interval(window)
    K0 = simplices_meeting_axis(cx, t0, t1)
    vpairs = v_adjacent_pairs(cx, real)
    nb = defaultdict(list)
    for a, b in vpairs.tolist():
        nb[a].append(b)
        nb[b].append(a)
    seen = set(K0)
    order = list(K0)
    parent = {}
    q = deque(K0)
    while q:
        u = q.popleft()
        for v in nb[u]:
            if v not in seen:
                seen.add(v)
                parent[v] = u
                order.append(v)
                q.append(v)
    K = sorted(seen)
    far = np.zeros(cx.dim)
    far[-1] = t1
    in_K = any(point_simplex_distance(far, cx.points[cx.simplices[i]]) <= EPS_GEO for i in K)
    return KGrowth(sorted(K0), K, order, parent, (t0, t1), not in_K)


# ---------------------------------------------------------------------------
# outer boundary and cycles


def window_margin_simplices(cx: DelaunayComplex, window: Region, margin: float = 1.0) -> np.ndarray:
    """Simplices with a vertex within ``margin`` of the window boundary."""
    shrunk = _shrink(window, margin)
    inside = shrunk.contains(cx.points)
    return np.flatnonzero(~np.all(inside[cx.simplices], axis=1))


def _shrink(window: Region, margin: float) -> Region:
    if window.kind == "ball":
        return Region.ball(window.center, max(window.radius - margin, 0.0))
    return Region.box(window.center, tuple(max(h - margin, 0.0) for h in window.half_widths))


def unbounded_mask(cx: DelaunayComplex, M, window: Region | None = None, margin: float = 1.0) -> np.ndarray:
    """Simplices outside ``M`` reached by flood fill from the hull (and window rim)."""
    inM = np.zeros(len(cx), dtype=bool)
    inM[list(M)] = True
    seeds = set(cx.hull_simplices.tolist())
    if window is not None:
        seeds |= set(window_margin_simplices(cx, window, margin).tolist())
    seeds = [s for s in seeds if not inM[s]]
    out = np.zeros(len(cx), dtype=bool)
    out[seeds] = True
    q = deque(seeds)
    while q:
        u = q.popleft()
        for v in cx.neighbors[u]:
            if not inM[v] and not out[v]:
                out[v] = True
                q.append(v)
    return out


def outer_boundary(cx: DelaunayComplex, M, window: Region | None = None, margin: float = 1.0) -> set:
    """Facets of ``M`` shared with a simplex in the unbounded complement.

    Hull facets of ``M`` face the exterior of the triangulation and count as
    outer.
    """
    M = sorted(set(int(i) for i in M))
    if not M:
        return set()
    inM = set(M)
    unb = unbounded_mask(cx, M, window, margin)
    out = set()
    for i in M:
        for f in faces(tuple(cx.simplices[i].tolist())):
            inc = cx.facet_map[f]
            others = [j for j in inc if j != i]
            if not others:
                out.add(f)
            elif others[0] not in inM and unb[others[0]]:
                out.add(f)
    return out


@dataclass
class CycleCandidate:
    faces: list
    is_cycle: bool
    touches_rim: bool


def cycle_candidate(cx: DelaunayComplex, real=None, window: Region | None = None,
                    K=None, rim: float = 2.0) -> list[CycleCandidate]:
    """Face components of the outer boundary of ``K`` with cycle verdicts.

    Boundary faces of a component within ``rim`` of the window boundary are
    ignored by the verdict, since a finite window cuts the family there.
    """
    if window is None:
        window = getattr(real, "region", None)
    if K is None:
        K = grow_K(cx, real, window).K
    if len(K) == 0:
        return []
    F = outer_boundary(cx, K, window)
    shrunk = _shrink(window, rim) if window is not None else None
    out = []
    for comp in tuple_components(F):
        bd = boundary_mod2(comp)
        if shrunk is None:
            far = bd
        else:
            far = {f for f in bd if np.all(shrunk.contains(cx.points[list(f)], tol=-EPS_GEO))}
        out.append(CycleCandidate(sorted(comp), not far, len(far) != len(bd)))
    return out


@dataclass(frozen=True)
class CircumradiusReport:
    max_g: float
    ell: float
    n_simplices: int

    @property
    def sqrt_ell(self) -> float:
        return float(np.sqrt(self.ell))

    @property
    def exceeds(self) -> bool:
        return self.max_g >= self.sqrt_ell


def circumradius_stats(cx: DelaunayComplex, window: Region | None, ell: float) -> CircumradiusReport:
    """Largest circumradius among simplices meeting ``B_ell(o)``."""
    if window is not None and not window.contains_ball(2 * ell):
        raise ValueError("window must contain the ball of radius 2*ell")
    if len(cx) == 0:
        return CircumradiusReport(0.0, ell, 0)
    V = cx.points[cx.simplices]
    if cx.dim == 2:
        dist = batch_hull_distance(V, np.zeros((len(cx), 1, 2)))
    else:
        o = np.zeros(cx.dim)
        dist = np.array([point_simplex_distance(o, v) for v in V])
    hit = dist <= ell + EPS_GEO
    g = float(cx.radii[hit].max()) if hit.any() else 0.0
    return CircumradiusReport(g, ell, int(hit.sum()))
