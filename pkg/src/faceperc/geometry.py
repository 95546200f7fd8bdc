"""Geometric kernels for small simplices.

Everything here works on plain numpy arrays: a point is a length-``D``
vector and a simplex is a ``(k+1, D)`` array of vertex coordinates.  The
distance routines are exact up to floating point for simplices with at most
four vertices, which is all the percolation code ever needs.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

#: Tolerance applied at every ``<= threshold`` comparison in the package.
EPS_GEO = 1e-9


class DegenerateSimplexError(ValueError):
    """Raised when a vertex set is (numerically) affinely dependent."""


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")

    def contains(self, points, tol=EPS_GEO) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.linalg.norm(points - self.center, axis=1) <= self.radius + tol


def as_simplex(vertices, check=True) -> np.ndarray:
    """Return ``vertices`` as a float array, validating a proper simplex.

    For ``d >= 2`` the vertices must be affinely independent; this is checked
    through the rank of the Gram matrix of edge vectors.
    """
    s = np.atleast_2d(np.asarray(vertices, dtype=float))
    if not np.all(np.isfinite(s)):
        raise ValueError("simplex vertices must be finite")
    if check:
        k = s.shape[0] - 1
        if k > s.shape[1]:
            raise DegenerateSimplexError(
                f"{k}-simplex cannot live in dimension {s.shape[1]}")
        if k >= 1:
            edges = s[1:] - s[0]
            scale = max(float(np.max(np.abs(edges))), 1.0)
            if k >= 2 or np.allclose(edges, 0.0):
                gram = edges @ edges.T
                if np.linalg.matrix_rank(gram, tol=1e-12 * scale**2) < k:
                    raise DegenerateSimplexError("vertices are affinely dependent")
    return s


def is_degenerate(vertices) -> bool:
    try:
        as_simplex(vertices)
    except DegenerateSimplexError:
        return True
    return False


def batch_is_degenerate(V) -> np.ndarray:
    """Vectorised :func:`is_degenerate` for an ``(m, k+1, D)`` stack."""
    V = np.asarray(V, dtype=float)
    m, k1, D = V.shape
    k = k1 - 1
    if k == 0:
        return np.zeros(m, dtype=bool)
    if k > D:
        return np.ones(m, dtype=bool)
    E = V[:, 1:] - V[:, :1]
    scale = np.maximum(np.abs(E).reshape(m, -1).max(axis=1), 1.0)
    sv = np.linalg.svd(E @ np.swapaxes(E, 1, 2), compute_uv=False)
    rank = (sv > (1e-12 * scale**2)[:, None]).sum(axis=1)
    return rank < k


def _affine_closest(p, s):
    """Project ``p`` onto the affine hull of ``s``; return (barycentric, point)."""
    if len(s) == 1:
        return np.ones(1), s[0]
    base = s[0]
    edges = (s[1:] - base).T
    coef, *_ = np.linalg.lstsq(edges, p - base, rcond=None)
    bary = np.concatenate(([1.0 - coef.sum()], coef))
    return bary, base + edges @ coef


def point_simplex_distance(p, s) -> float:
    """Euclidean distance from ``p`` to the convex hull of the rows of ``s``.

    Uses recursive projection: if the orthogonal projection onto the affine
    hull lands inside the simplex it is the nearest point, otherwise the
    nearest point sits on one of the facets.
    """
    p = np.asarray(p, dtype=float)
    s = np.atleast_2d(np.asarray(s, dtype=float))
    if p.shape[-1] != s.shape[1]:
        raise ValueError(f"dimension mismatch: point in R^{p.shape[-1]}, "
                         f"simplex in R^{s.shape[1]}")
    return _point_hull_distance(p, s)


def _point_hull_distance(p, s):
    bary, q = _affine_closest(p, s)
    if np.all(bary >= -1e-12):
        return float(np.linalg.norm(p - q))
    return min(_point_hull_distance(p, s[list(f)])
               for f in combinations(range(len(s)), len(s) - 1))


def _faces_of(n_vertices):
    for k in range(1, n_vertices + 1):
        yield from combinations(range(n_vertices), k)


def simplex_simplex_distance(s1, s2) -> float:
    """Distance between the convex hulls of two simplices.

    Enumerates pairs of faces ``(F1, F2)`` and solves the unconstrained
    closest-point problem between their affine hulls.  A candidate counts
    only when both solutions have nonnegative barycentric coordinates.  At an
    optimum realised by minimal faces the affine problem is uniquely solvable
    and ``dim F1 + dim F2 <= D``, so restricting to those pairs is exact.
    """
    a = np.atleast_2d(np.asarray(s1, dtype=float))
    b = np.atleast_2d(np.asarray(s2, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise ValueError("dimension mismatch between simplices")
    dim = a.shape[1]
    best = float(np.min(np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)))
    if best == 0.0:
        return 0.0
    for f1 in _faces_of(len(a)):
        for f2 in _faces_of(len(b)):
            k1, k2 = len(f1) - 1, len(f2) - 1
            if k1 + k2 == 0 or k1 + k2 > dim:
                continue
            val = _face_pair_distance(a[list(f1)], b[list(f2)])
            if val is not None and val < best:
                best = val
    return best


def _face_pair_distance(f1, f2):
    # minimise |(u0 + U a) - (v0 + V b)| over a, b; columns stacked as [U, -V]
    u0, v0 = f1[0], f2[0]
    U = (f1[1:] - u0).T
    V = (f2[1:] - v0).T
    A = np.hstack([U, -V])
    sol, *_ = np.linalg.lstsq(A, v0 - u0, rcond=None)
    ca, cb = sol[: U.shape[1]], sol[U.shape[1]:]
    if np.any(ca < -1e-12) or np.any(cb < -1e-12):
        return None
    if ca.sum() > 1 + 1e-12 or cb.sum() > 1 + 1e-12:
        return None
    return float(np.linalg.norm(u0 + U @ ca - v0 - V @ cb))


def point_segment_distances(points, a, b) -> np.ndarray:
    """Vectorised distance from each row of ``points`` to the segment [a, b]."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.linalg.norm(points - a, axis=1)
    t = np.clip((points - a) @ ab / denom, 0.0, 1.0)
    return np.linalg.norm(points - (a + t[:, None] * ab), axis=1)


def segment_clear_of_balls(a, b, centers, radius) -> bool:
    """True iff every center is strictly farther than ``radius`` from [a, b]."""
    centers = np.asarray(centers, dtype=float)
    if centers.size == 0:
        return True
    return bool(np.min(point_segment_distances(centers, a, b)) > radius)


def segment_segment_distances(p0, p1, q0, q1) -> np.ndarray:
    """Batched distance between segments ``[p0[i], p1[i]]`` and ``[q0[i], q1[i]]``.

    Any ambient dimension; degenerate (zero-length) segments are fine.
    """
    p0, p1, q0, q1 = (np.atleast_2d(np.asarray(x, dtype=float)) for x in (p0, p1, q0, q1))
    d1 = p1 - p0
    d2 = q1 - q0
    r = p0 - q0
    a = np.einsum("ij,ij->i", d1, d1)
    e = np.einsum("ij,ij->i", d2, d2)
    f = np.einsum("ij,ij->i", d2, r)
    c = np.einsum("ij,ij->i", d1, r)
    b = np.einsum("ij,ij->i", d1, d2)
    tiny = 1e-300
    a_ok = a > tiny
    e_ok = e > tiny
    a_safe = np.where(a_ok, a, 1.0)
    e_safe = np.where(e_ok, e, 1.0)
    denom = a * e - b * b
    par = denom <= 1e-14 * a * e
    s = np.where(par, 0.0, np.clip((b * f - c * e) / np.where(par, 1.0, denom), 0, 1))
    t = (b * s + f) / e_safe
    s = np.where(t < 0, np.clip(-c / a_safe, 0, 1), s)
    s = np.where(t > 1, np.clip((b - c) / a_safe, 0, 1), s)
    t = np.clip(t, 0, 1)
    # degenerate segments
    s = np.where(e_ok, s, np.clip(-c / a_safe, 0, 1))
    t = np.where(e_ok, t, 0.0)
    t = np.where(a_ok, t, np.clip(f / e_safe, 0, 1))
    s = np.where(a_ok, s, 0.0)
    diff = (p0 + d1 * s[:, None]) - (q0 + d2 * t[:, None])
    return np.linalg.norm(diff, axis=1)


def _circumsphere(points):
    """Center of the smallest sphere through ``points`` within their affine hull."""
    base = points[0]
    if len(points) == 1:
        return base.copy()
    E = points[1:] - base
    rhs = 0.5 * np.einsum("ij,ij->i", E, E)
    # center = base + E^T c with (E E^T) c = rhs
    coef = np.linalg.solve(E @ E.T, rhs)
    return base + E.T @ coef


def circumball(s) -> Ball:
    """Circumscribed ball of a full-dimensional simplex (``D+1`` vertices)."""
    s = np.atleast_2d(np.asarray(s, dtype=float))
    dim = s.shape[1]
    if s.shape[0] != dim + 1:
        raise ValueError(f"circumball needs {dim + 1} vertices in R^{dim}")
    E = s[1:] - s[0]
    scale = max(float(np.max(np.abs(E))), 1e-300)
    det = np.linalg.det(E / scale)
    if abs(det) < 1e-12:
        raise DegenerateSimplexError("co-hyperplanar vertices have no circumball")
    rhs = 0.5 * np.einsum("ij,ij->i", E, E)
    center = s[0] + np.linalg.solve(E, rhs)
    radius = float(np.max(np.linalg.norm(s - center, axis=1)))
    return Ball(center, radius)


def min_enclosing_ball(points) -> Ball:
    """Smallest ball containing all points (Welzl's move-to-front recursion).

    Inputs here are tiny (a handful of points), so the plain recursion with a
    fixed order is fine; the radius is exact to round-off.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0 or pts.shape[0] == 0:
        raise ValueError("min_enclosing_ball needs at least one point")
    dim = pts.shape[1]

    def ball_of(support):
        if not support:
            return None
        sp = pts[support]
        try:
            c = _circumsphere(sp)
        except np.linalg.LinAlgError:
            return None
        return c, float(np.max(np.linalg.norm(sp - c, axis=1)))

    def inside(ball, i):
        return ball is not None and np.linalg.norm(pts[i] - ball[0]) <= ball[1] + 1e-12

    def welzl(idx, support):
        ball = ball_of(support)
        if len(support) == dim + 1:
            return ball
        for j, i in enumerate(idx):
            if not inside(ball, i):
                ball = welzl(idx[:j], support + [i])
        return ball

    center, radius = welzl(list(range(len(pts))), [])
    # the support construction leaves the radius defined by the boundary points
    radius = float(np.max(np.linalg.norm(pts - center, axis=1)))
    return Ball(center, radius)


def _boundary_segments(k):
    if k == 0:
        return [(0, 0)]
    if k == 1:
        return [(0, 1)]
    return list(combinations(range(k + 1), 2))


def _points_in_triangles(pts, tri):
    """Batched closed point-in-triangle test in the plane; shapes (m,2), (m,3,2)."""
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]

    def cross(o, u, v):
        return (u[:, 0] - o[:, 0]) * (v[:, 1] - o[:, 1]) - (u[:, 1] - o[:, 1]) * (v[:, 0] - o[:, 0])

    d1, d2, d3 = cross(a, b, pts), cross(b, c, pts), cross(c, a, pts)
    tol = 1e-15
    has_neg = (d1 < -tol) | (d2 < -tol) | (d3 < -tol)
    has_pos = (d1 > tol) | (d2 > tol) | (d3 > tol)
    return ~(has_neg & has_pos)


def batch_hull_distance(A, B) -> np.ndarray:
    """Hull distances for paired simplices ``A[i]``, ``B[i]`` (arrays ``(m, k+1, D)``).

    Closed forms are used for simplices with at most two vertices in any
    dimension and for anything up to triangles in the plane; other shapes go
    through :func:`simplex_simplex_distance` one pair at a time.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    m = A.shape[0]
    if m == 0:
        return np.zeros(0)
    ka, kb, dim = A.shape[1] - 1, B.shape[1] - 1, A.shape[2]
    if max(ka, kb) <= 1 or (dim == 2 and max(ka, kb) <= 2):
        best = np.full(m, np.inf)
        for i0, i1 in _boundary_segments(ka):
            for j0, j1 in _boundary_segments(kb):
                best = np.minimum(best, segment_segment_distances(
                    A[:, i0], A[:, i1], B[:, j0], B[:, j1]))
        if ka == 2:
            for j in range(kb + 1):
                best[_points_in_triangles(B[:, j], A)] = 0.0
        if kb == 2:
            for i in range(ka + 1):
                best[_points_in_triangles(A[:, i], B)] = 0.0
        return best
    return np.array([simplex_simplex_distance(A[i], B[i]) for i in range(m)])
