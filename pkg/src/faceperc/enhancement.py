"""Special points, Gamma-thinning, thinned crossing estimators and pivot events.

A point ``x`` is special when its ``r0``-ball holds, besides ``x``, exactly
two tight groups of ``d`` points near ``x`` and far from each other.  The
detector certifies this with minimal enclosing balls as witness centers, so
every report is a true special point; the grid audit looks for the ones it
misses.

Marks are driven by per-point uniforms (``xi1 = U1 < p``, ``xi2 = U2 < q``),
which couples all ``(p, q)`` monotonically on shared streams.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from itertools import combinations

import numpy as np
from scipy.spatial import cKDTree

from .geometry import min_enclosing_ball
from .percolation import crossing_face, crossing_star
from .points import MarkedRealization, Realization, Region, SeedLineage, sample_poisson
from .stats import standard_error, wilson_interval

R_SMALL = 1 / 8
R_NEAR = 7 / 8
SEPARATION = 5 / 4
MARGIN = 1e-9


def check_r0(r0: float):
    if not r0 > 2:
        raise ValueError(f"r0 = {r0} violates the enhancement hypothesis r0 > 2")


@dataclass(frozen=True)
class SpecialPointReport:
    point: int
    y: tuple
    z: tuple
    group_y: tuple
    group_z: tuple
    radius_y: float
    radius_z: float
    dist_xy: float
    dist_xz: float
    dist_yz: float
    n_in_ball: int


def _coords(real):
    return np.asarray(getattr(real, "points", real), dtype=float)


def _interior_mask(real, r0) -> np.ndarray:
    """Points whose whole ``r0``-ball lies in the sampling region."""
    pts = _coords(real)
    region = getattr(real, "region", None)
    if region is None or len(pts) == 0:
        return np.ones(len(pts), dtype=bool)
    c = np.asarray(region.center)
    if region.kind == "ball":
        return np.linalg.norm(pts - c, axis=1) + r0 <= region.radius
    return np.all(np.abs(pts - c) + r0 <= np.asarray(region.half_widths), axis=1)


def _witness(pts, x, group):
    ball = min_enclosing_ball(pts[list(group)])
    return ball.center, ball.radius


def detect_special(real, r0: float, d: int, candidates=None) -> list[SpecialPointReport]:
    """Conservative special-point detector; see the module docstring.

    Points whose ``r0``-ball is not inside the sampling region are never
    reported, since their neighbourhood is not fully observed.
    """
    check_r0(r0)
    pts = _coords(real)
    if len(pts) == 0:
        return []
    tree = cKDTree(pts)
    interior = _interior_mask(real, r0)
    ids = range(len(pts)) if candidates is None else candidates
    out = []
    for i in ids:
        if not interior[i]:
            continue
        nb = [j for j in tree.query_ball_point(pts[i], r0 + MARGIN) if j != i]
        if len(nb) != 2 * d:
            continue
        nb.sort()
        first, rest = nb[0], nb[1:]
        for others in combinations(rest, d - 1):
            gy = tuple(sorted((first,) + others))
            gz = tuple(j for j in nb if j not in gy)
            rep = _check_pair(pts, i, gy, gz)
            if rep is not None:
                out.append(rep)
                break
    return out


def _check_pair(pts, i, gy, gz):
    x = pts[i]
    y, ry = _witness(pts, x, gy)
    z, rz = _witness(pts, x, gz)
    dxy, dxz, dyz = (float(np.linalg.norm(a - b)) for a, b in ((x, y), (x, z), (y, z)))
    ok = (ry <= R_SMALL - MARGIN and rz <= R_SMALL - MARGIN
          and dxy <= R_NEAR - MARGIN and dxz <= R_NEAR - MARGIN
          and dyz > SEPARATION + MARGIN
          # x itself must stay out of both small balls, or the counts would be d + 1
          and dxy > R_SMALL + MARGIN and dxz > R_SMALL + MARGIN)
    if not ok:
        return None
    return SpecialPointReport(int(i), tuple(map(float, y)), tuple(map(float, z)), gy, gz, float(ry),
                              float(rz), dxy, dxz, dyz, len(gy) + len(gz))


def verify_special(pts, r0: float, d: int, rep: SpecialPointReport) -> bool:
    """Re-check a report against the raw definition with its witness centers."""
    pts = np.asarray(pts, dtype=float)
    x = pts[rep.point]
    y, z = np.asarray(rep.y), np.asarray(rep.z)
    if not (np.linalg.norm(y - x) + R_SMALL <= 1 and np.linalg.norm(z - x) + R_SMALL <= 1):
        return False
    if not np.linalg.norm(y - z) - 2 * R_SMALL > 1:
        return False
    in_y = np.linalg.norm(pts - y, axis=1) <= R_SMALL
    in_z = np.linalg.norm(pts - z, axis=1) <= R_SMALL
    if in_y.sum() != d or in_z.sum() != d:
        return False
    near = np.linalg.norm(pts - x, axis=1) <= r0
    near[rep.point] = False
    return not np.any(near & ~in_y & ~in_z)


def special_mask(real, r0: float, d: int) -> np.ndarray:
    mask = np.zeros(len(_coords(real)), dtype=bool)
    for rep in detect_special(real, r0, d):
        mask[rep.point] = True
    return mask


def special_feasibility_grid(real, i: int, r0: float, d: int, step: float = 1 / 64) -> bool:
    """Grid search for witness centers ``y, z`` of point ``i`` (audit only).

    Candidate centers are grid points within ``1/8`` of the first member of
    each group; a hit is a feasible pair, so ``True`` is a certificate while
    ``False`` may miss thin feasible sets.
    """
    pts = _coords(real)
    x = pts[i]
    tree = cKDTree(pts)
    nb = [j for j in tree.query_ball_point(x, r0 + MARGIN) if j != i]
    if len(nb) != 2 * d:
        return False
    g = np.arange(-R_SMALL, R_SMALL + step / 2, step)
    offs = np.array(np.meshgrid(*[g] * pts.shape[1])).reshape(pts.shape[1], -1).T
    offs = offs[np.linalg.norm(offs, axis=1) <= R_SMALL]

    def centers(group):
        c = pts[group[0]] + offs
        ok = np.linalg.norm(c - x, axis=1) <= R_NEAR
        ok &= np.linalg.norm(c - x, axis=1) > R_SMALL
        for j in group:
            ok &= np.linalg.norm(c - pts[j], axis=1) <= R_SMALL
        return c[ok]

    nb.sort()
    for others in combinations(nb[1:], d - 1):
        gy = (nb[0],) + others
        gz = tuple(j for j in nb if j not in gy)
        cy, cz = centers(gy), centers(gz)
        if len(cy) and len(cz):
            dist = np.linalg.norm(cy[:, None, :] - cz[None, :, :], axis=2)
            if dist.max() > SEPARATION:
                return True
    return False


# ---------------------------------------------------------------------------
# thinning


@dataclass(frozen=True)
class ThinnedSet:
    ids: np.ndarray
    special: np.ndarray

    def points(self, real) -> np.ndarray:
        return _coords(real)[self.ids]


def gamma(special, xi1, xi2) -> np.ndarray:
    """Survival bit per point: ``xi1 * xi2`` at special points, else ``xi1``."""
    special = np.asarray(special, dtype=bool)
    xi1 = np.asarray(xi1, dtype=bool)
    xi2 = np.asarray(xi2, dtype=bool)
    return np.where(special, xi1 & xi2, xi1)


def gamma_thin(marked: MarkedRealization, r0: float, d: int, special=None) -> ThinnedSet:
    check_r0(r0)
    if special is None:
        special = special_mask(marked.base, r0, d)
    keep = gamma(special, marked.xi1, marked.xi2)
    return ThinnedSet(np.flatnonzero(keep), np.asarray(special, dtype=bool))


def mark_uniforms(lin: SeedLineage, n: int, xi2_stream: str = "xi2"):
    """Per-point uniforms for the two mark fields from dedicated streams."""
    return lin.rng("xi1").uniform(size=n), lin.rng(xi2_stream).uniform(size=n)


@dataclass(frozen=True)
class ThinSpec:
    lam: float
    p: float
    q: float
    n: float
    replicas: int
    seed: int = 0
    D: int = 2
    d: int = 1
    r0: float = 2.5

    def __post_init__(self):
        check_r0(self.r0)
        if not (0 <= self.p <= 1 and 0 <= self.q <= 1):
            raise ValueError("p and q must lie in [0, 1]")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")

    @property
    def window(self) -> Region:
        return Region.centered_ball(self.D, self.n + 2 * self.r0 + 1)


def thinned_crossings(spec: ThinSpec, replica: int, xi2_stream: str = "xi2") -> tuple[int, int, int]:
    """(face, star, number of special points) for one replica."""
    lin = SeedLineage(spec.seed, replica)
    real = sample_poisson(spec.window, spec.lam, lin)
    u1, u2 = mark_uniforms(lin, len(real), xi2_stream)
    sp = special_mask(real, spec.r0, spec.d)
    keep = gamma(sp, u1 < spec.p, u2 < spec.q)
    pts = real.points[keep]
    face = crossing_face(pts, spec.d, spec.n)
    star = crossing_star(pts, spec.d, spec.n, spec.r0)
    if face > star:
        raise AssertionError("face crossing without star crossing")
    return face, star, int(sp.sum())


def _estimate(bits) -> dict:
    bits = np.asarray(bits)
    lo, hi = wilson_interval(int(bits.sum()), len(bits))
    return {"estimate": float(bits.mean()), "ci95": [lo, hi], "se": standard_error(bits)}


def theta_face_thin(spec: ThinSpec) -> dict:
    """Monte Carlo mean of the thinned face crossing."""
    bits = [thinned_crossings(spec, i)[0] for i in range(spec.replicas)]
    return _estimate(bits)


def theta_star_thin(spec: ThinSpec) -> dict:
    """Monte Carlo mean of the thinned star crossing."""
    bits = [thinned_crossings(spec, i)[1] for i in range(spec.replicas)]
    return _estimate(bits)


def xi2_invariance(spec: ThinSpec) -> dict:
    """Face crossings on paired streams that differ only in ``xi2``."""
    a = np.zeros(spec.replicas, dtype=np.int8)
    b = np.zeros(spec.replicas, dtype=np.int8)
    sa = np.zeros(spec.replicas, dtype=np.int8)
    sb = np.zeros(spec.replicas, dtype=np.int8)
    specials = 0
    for i in range(spec.replicas):
        a[i], sa[i], k = thinned_crossings(spec, i, "xi2")
        b[i], sb[i], _ = thinned_crossings(spec, i, "xi2_alt")
        specials += k
    return {"mismatches": int(np.sum(a != b)), "face_rate": float(a.mean()),
            "star_differs": int(np.sum(sa != sb)), "special_points": specials, "replicas": spec.replicas}


# ---------------------------------------------------------------------------
# pivot events


@dataclass(frozen=True)
class PivResult:
    with_one: int
    with_zero: int

    @property
    def pivotal(self) -> bool:
        return self.with_one != self.with_zero


def piv_events(x, j: int, ell: float | None, n: float, points, xi1, xi2, xi1_x: bool, xi2_x: bool,
               r0: float, d: int, window: Region | None = None) -> PivResult:
    """Star crossing of ``T(X + x)`` with mark ``j`` at ``x`` forced to 1 and to 0.

    ``xi1``, ``xi2`` are the marks of ``points``; ``xi1_x``, ``xi2_x`` the
    marks at ``x`` (only the one not being edited is read).  With ``ell > 0``,
    ``xi2`` is first set to 1 on ``B_{ell + r0}(x)`` minus ``x``; ``ell`` of 0
    or ``None`` gives the plain events.
    """
    check_r0(r0)
    if j not in (1, 2):
        raise ValueError("j must be 1 or 2")
    pts = np.asarray(points, dtype=float).reshape(-1, len(x))
    x = np.asarray(x, dtype=float)
    allp = np.vstack([pts, x[None, :]])
    m1 = np.append(np.asarray(xi1, dtype=bool), bool(xi1_x))
    m2 = np.append(np.asarray(xi2, dtype=bool), bool(xi2_x))
    if ell is not None and ell < 0:
        raise ValueError("ell must be nonnegative")
    if ell:
        near = np.linalg.norm(allp - x, axis=1) <= ell + r0
        near[-1] = False
        m2 = m2 | near
    region = window
    real = Realization(allp, region, 0.0) if region is not None else allp
    sp = special_mask(real, r0, d) if len(allp) else np.zeros(0, dtype=bool)
    res = []
    for val in (1, 0):
        a, b = m1.copy(), m2.copy()
        (a if j == 1 else b)[-1] = bool(val)
        keep = gamma(sp, a, b)
        res.append(crossing_star(allp[keep], d, n, r0))
    return PivResult(*res)


# ---------------------------------------------------------------------------
# enhancement experiment


@dataclass
class EnhancementRow:
    n: float
    left: dict
    right: dict
    face_left: dict
    face_right: dict
    special_mean: float
    ordering: str


def _enhancement_check(lam, p, delta, r0):
    check_r0(r0)
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if not (0 < p - delta and p + delta < 1):
        raise ValueError("need 0 < p - delta and p + delta < 1")


def enhancement_replica(lam: float, p: float, delta: float, n_grid, seed: int, replica: int, D: int = 2,
                        d: int = 1, r0: float = 2.5, q_left: float = 0.5, q_right: float = 0.25) -> dict:
    """One coupled replica: star and face crossings of both sides for every ``n``.

    Both sides are thinnings of one base sample with one pair of uniforms.
    """
    n_grid = sorted(n_grid)
    window = Region.centered_ball(D, max(n_grid) + 2 * r0 + 1)
    lin = SeedLineage(seed, replica)
    real = sample_poisson(window, lam, lin)
    u1, u2 = mark_uniforms(lin, len(real))
    sp = special_mask(real, r0, d)
    left = real.points[gamma(sp, u1 < p - delta, u2 < q_left)]
    right = real.points[gamma(sp, u1 < p + delta, u2 < q_right)]
    row = {"n_points": len(real), "specials": int(sp.sum())}
    for n in n_grid:
        row[n] = (crossing_star(left, d, n, r0), crossing_star(right, d, n, r0),
                  crossing_face(left, d, n), crossing_face(right, d, n))
    return row


def enhancement_rows(n_grid, rows: list[dict]) -> list[EnhancementRow]:
    specials = [r["specials"] for r in rows]
    out = []
    for n in sorted(n_grid):
        cols = np.array([r[n] for r in rows], dtype=int).reshape(-1, 4)
        a, b = _estimate(cols[:, 0]), _estimate(cols[:, 1])
        order = ">" if a["estimate"] > b["estimate"] else "<" if a["estimate"] < b["estimate"] else "="
        out.append(EnhancementRow(n, a, b, _estimate(cols[:, 2]), _estimate(cols[:, 3]),
                                  float(np.mean(specials)) if specials else 0.0, order))
    return out


def enhancement_experiment(lam: float, p: float, delta: float, n_grid, replicas: int, seed: int = 0,
                           D: int = 2, d: int = 1, r0: float = 2.5, q_left: float = 0.5,
                           q_right: float = 0.25) -> list[EnhancementRow]:
    """Paired estimates of ``Theta*_n(lam, p - delta, 1/2)`` and ``Theta*_n(lam, p + delta, 1/4)``.

    The ordering is reported, not asserted.
    """
    _enhancement_check(lam, p, delta, r0)
    rows = [enhancement_replica(lam, p, delta, n_grid, seed, i, D, d, r0, q_left, q_right)
            for i in range(replicas)]
    return enhancement_rows(n_grid, rows)
