"""Crossing indicators, rooted-cluster reach, cycle crossings and decay fits.

All crossing events are read off a component labelling of the d-simplices:
a component "starts" when one of its simplices meets the closed unit ball and
"reaches" radius ``n`` when one of its vertices has norm at least ``n``.
Points that provably cannot influence an event are pruned before any
simplex is built.
"""
from __future__ import annotations

import hashlib
import json
import math
import time
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .geometry import EPS_GEO, point_simplex_distance
from .points import GENERATOR, Region, Realization, SeedLineage, sample_poisson
from .rips import (SimplexTable, boundary_mod2, enumerate_d_simplices, face_cluster_labels,
                   faces, star_cluster_labels, tuple_components)
from .stats import standard_error, wilson_interval

SCHEMA_VERSION = 1


class WindowError(ValueError):
    """The sampling window is too small for the requested event."""


class ContainmentViolation(AssertionError):
    """cycle => face => star failed on some realization."""


# ---------------------------------------------------------------------------
# specs


@dataclass(frozen=True)
class CrossingSpec:
    d: int
    n: float
    mode: str = "face"
    r0: float | None = None
    w: float | None = None

    def __post_init__(self):
        if self.mode not in ("face", "star", "cycle"):
            raise ValueError(f"unknown crossing mode {self.mode!r}")
        if not self.n > 2:
            raise ValueError("n must exceed 2")
        if self.mode == "star" and not (self.r0 and self.r0 > 0):
            raise ValueError("star mode needs r0 > 0")
        if self.mode == "cycle":
            if self.w is None or not 0 < self.w < self.n / 4:
                raise ValueError("cycle mode needs a collar w in (0, n/4)")
            if not self.n > 2 + 2 * self.w:
                raise ValueError("cycle mode needs n > 2 + 2w")

    @property
    def window(self) -> float:
        """Radius of the ball the realization must cover."""
        return self.n + 1 + (self.r0 if self.mode == "star" else 0.0)


@dataclass(frozen=True)
class ThetaSpec:
    """Rooted-cluster reach experiment.  ``r`` is one radius or a tuple."""

    D: int
    d: int
    r: float | tuple
    lam: float
    replicas: int
    seed: int = 0

    def __post_init__(self):
        if min(self.radii) < 1:
            raise ValueError("radii must be >= 1")
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if not 1 <= self.d <= self.D:
            raise ValueError("need 1 <= d <= D")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")

    @property
    def radii(self) -> tuple:
        return tuple(self.r) if isinstance(self.r, (tuple, list)) else (self.r,)

    @property
    def window(self) -> Region:
        return Region.centered_ball(self.D, max(self.radii) + 2)


# ---------------------------------------------------------------------------
# experiment records


@dataclass(eq=False)
class ExperimentRecord:
    """Per-replica indicator bits plus aggregates and provenance."""

    kind: str
    params: dict
    seed_root: int
    bits: np.ndarray
    n_points: np.ndarray
    columns: dict = field(default_factory=dict)
    runtime_ms: np.ndarray | None = None
    wall_clock_s: float = 0.0

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.int64)
        self.n_points = np.asarray(self.n_points, dtype=np.int64)

    @property
    def replicas(self) -> int:
        return len(self.bits)

    @property
    def estimate(self) -> float:
        return float(self.bits.mean()) if len(self.bits) else float("nan")

    @property
    def ci(self) -> tuple[float, float]:
        return wilson_interval(int(self.bits.sum()), len(self.bits))

    @property
    def se(self) -> float:
        return standard_error(self.bits)

    def summary(self, timings: bool = False) -> dict:
        lo, hi = self.ci
        out = {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "params": self.params,
            "seed": {"root": self.seed_root, "generator": GENERATOR},
            "replicas": self.replicas,
            "successes": int(self.bits.sum()),
            "estimate": self.estimate,
            "ci95": [lo, hi],
            "se": self.se,
        }
        if timings:
            out["wall_clock_s"] = self.wall_clock_s
        return out

    def to_json(self, timings: bool = False) -> str:
        return json.dumps(self.summary(timings), indent=2, sort_keys=True, default=_jsonable) + "\n"

    def to_csv(self, timings: bool = False) -> str:
        """One row per replica.  ``runtime_ms`` is blank unless ``timings``."""
        extra = sorted(self.columns)
        head = ["replica", "seed", "indicator", "n_points", "runtime_ms", *extra]
        lines = [",".join(head)]
        for i in range(self.replicas):
            rt = ""
            if timings and self.runtime_ms is not None:
                rt = f"{self.runtime_ms[i]:.3f}"
            row = [str(i), f"{self.seed_root}/{i}", str(int(self.bits[i])), str(int(self.n_points[i])), rt]
            row += [_fmt(self.columns[c][i]) for c in extra]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256((self.to_json() + self.to_csv()).encode()).hexdigest()


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


# ---------------------------------------------------------------------------
# crossing indicators


def _coords(real) -> np.ndarray:
    pts = np.asarray(getattr(real, "points", real), dtype=float)
    if pts.ndim != 2:
        raise ValueError("points must be a 2-d array of shape (n, D)")
    return pts


def _require_window(real, radius: float):
    region = getattr(real, "region", None)
    if region is not None and not region.contains_ball(radius):
        raise WindowError(f"sampling window must contain the ball of radius {radius}")


def _prune(pts: np.ndarray, radius: float) -> np.ndarray:
    if len(pts) == 0:
        return pts
    return pts[np.linalg.norm(pts, axis=1) <= radius + 2 * EPS_GEO]


def _labels_d1_face(table: SimplexTable) -> np.ndarray:
    """Face clusters for d = 1 are the edge sets of graph components."""
    if len(table) == 0:
        return np.zeros(0, dtype=np.int64)
    n = len(table.points)
    e = table.simplices
    g = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    _, comp = connected_components(g, directed=False)
    return comp[e[:, 0]].astype(np.int64)


def face_labels(table: SimplexTable) -> np.ndarray:
    if table.d == 1:
        return _labels_d1_face(table)
    return face_cluster_labels(table)


def star_labels(table: SimplexTable, r0: float) -> np.ndarray:
    return star_cluster_labels(table, r0)


def _crossing_from_labels(labels, min_norm, max_norm, n) -> int:
    if len(labels) == 0:
        return 0
    starts = labels[min_norm <= 1 + EPS_GEO]
    reaches = labels[max_norm >= n - EPS_GEO]
    return int(np.intersect1d(starts, reaches).size > 0)


def crossing_table(real, d: int, n: float, mode: str = "face", r0: float | None = None) -> SimplexTable:
    """The pruned simplex table a crossing decision is computed from."""
    radius = n + 1 + (r0 if mode == "star" else 0.0)
    return enumerate_d_simplices(_prune(_coords(real), radius), d)


def crossing_face(real, d: int, n: float) -> int:
    """1 iff a face cluster joins the unit ball to the complement of ``B_n``."""
    _require_window(real, n + 1)
    table = crossing_table(real, d, n)
    return _crossing_from_labels(face_labels(table), table.min_norm, table.max_norm, n)


def crossing_star(real, d: int, n: float, r0: float) -> int:
    """As :func:`crossing_face` with clusters of the ``r0`` star adjacency."""
    if not r0 > 0:
        raise ValueError("r0 must be positive")
    _require_window(real, n + r0 + 1)
    table = crossing_table(real, d, n, "star", r0)
    return _crossing_from_labels(star_labels(table, r0), table.min_norm, table.max_norm, n)


def crossing(real, spec: CrossingSpec):
    if spec.mode == "face":
        return crossing_face(real, spec.d, spec.n)
    if spec.mode == "star":
        return crossing_star(real, spec.d, spec.n, spec.r0)
    return cycle_crossing(real, spec.d, spec.n, spec.w)


def crossing_triple(real, d: int, n: float, r0: float, w: float) -> tuple:
    """(cycle, face, star) on one realization; raises if the chain breaks."""
    cyc = cycle_crossing(real, d, n, w)
    face = crossing_face(real, d, n)
    star = crossing_star(real, d, n, r0)
    if (cyc == 1 and face != 1) or (face == 1 and star != 1):
        raise ContainmentViolation(f"cycle={cyc} face={face} star={star}")
    return cyc, face, star


# ---------------------------------------------------------------------------
# rooted reach (theta)


def origin_reach(points, d: int) -> float:
    """Largest vertex norm in the face clusters of simplices containing ``o``.

    ``points`` excludes the origin.  Returns ``-1`` when ``o`` is a vertex of
    no d-simplex.  The indicator of theta_r is ``origin_reach >= r``.
    """
    pts = np.ascontiguousarray(points, dtype=float)
    if d == 1:
        from ._fast import origin_reach_d1
        return float(origin_reach_d1(pts)) if len(pts) else -1.0
    allp = np.vstack([pts, np.zeros((1, pts.shape[1]))])
    table = enumerate_d_simplices(allp, d)
    if len(table) == 0:
        return -1.0
    o = len(pts)
    at_o = np.any(table.simplices == o, axis=1)
    if not at_o.any():
        return -1.0
    labels = face_labels(table)
    mine = np.isin(labels, labels[at_o])
    return float(table.max_norm[mine].max())


def theta_indicator(real, d: int, r: float) -> int:
    _require_window(real, r + 1)
    pts = _prune(_coords(real), r + 1)
    return int(origin_reach(pts, d) >= r - EPS_GEO)


def _theta_replica(spec: ThetaSpec, replica: int):
    t0 = time.perf_counter()
    real = sample_poisson(spec.window, spec.lam, SeedLineage(spec.seed, replica))
    pts = _prune(real.points, max(spec.radii) + 1)
    reach = origin_reach(pts, spec.d)
    return reach, len(real), 1e3 * (time.perf_counter() - t0)


def theta_reaches(spec: ThetaSpec, replicas=None):
    """Per-replica reach, point count and runtime for ``replicas`` (default all)."""
    ids = range(spec.replicas) if replicas is None else replicas
    rows = [_theta_replica(spec, i) for i in ids]
    if not rows:
        return np.zeros(0), np.zeros(0, dtype=np.int64), np.zeros(0)
    reach, npts, rt = map(np.asarray, zip(*rows))
    return reach.astype(float), npts.astype(np.int64), rt.astype(float)


def theta_records(spec: ThetaSpec, reach, n_points, runtime_ms=None, wall=0.0) -> dict:
    """One record per radius, all built from the same realizations."""
    out = {}
    for r in spec.radii:
        params = {**asdict(spec), "r": r}
        out[r] = ExperimentRecord("theta", params, spec.seed, (reach >= r - EPS_GEO).astype(int),
                                  n_points, {"reach": np.round(reach, 12)}, runtime_ms, wall)
    return out


def theta_curve(spec: ThetaSpec) -> dict:
    t0 = time.perf_counter()
    reach, npts, rt = theta_reaches(spec)
    return theta_records(spec, reach, npts, rt, time.perf_counter() - t0)


def theta_estimate(spec: ThetaSpec) -> ExperimentRecord:
    """Monte Carlo estimate of theta_{d,r} on windows ``B_{r+2}``."""
    if len(spec.radii) != 1:
        raise ValueError("theta_estimate takes one radius; use theta_curve for several")
    return theta_curve(spec)[spec.radii[0]]


# ---------------------------------------------------------------------------
# collar-relative cycle crossing


@dataclass
class CycleResult:
    verdict: int | None
    witness: list = field(default_factory=list)
    reason: str = ""


def _face_norms(points, face: tuple) -> tuple[float, float]:
    v = points[list(face)]
    nv = np.linalg.norm(v, axis=1)
    if len(face) == 1:
        return float(nv[0]), float(nv[0])
    return point_simplex_distance(np.zeros(points.shape[1]), v), float(nv.max())


def _in_collar(points, face, n, w) -> bool:
    lo, hi = _face_norms(points, face)
    return lo <= 1 + w + EPS_GEO or hi >= n - w - EPS_GEO


def verify_cycle_witness(points, M, n: float, w: float) -> bool:
    """Exact check of a candidate witness family of sorted vertex tuples."""
    M = [tuple(s) for s in M]
    if not M or len(set(M)) != len(M):
        return False
    if len(tuple_components(M)) != 1:
        return False
    o = np.zeros(points.shape[1])
    mins = np.array([point_simplex_distance(o, points[list(s)]) for s in M])
    maxs = np.array([np.linalg.norm(points[list(s)], axis=1).max() for s in M])
    if not np.any(mins <= 1 + EPS_GEO):
        return False
    if not np.any((mins <= n + EPS_GEO) & (maxs >= n - EPS_GEO)):
        return False
    return all(_in_collar(points, f, n, w) for f in boundary_mod2(M))


def _gf2_kernel(columns: list[int]) -> list[int]:
    """Kernel basis of a GF(2) matrix given as column bitmasks (rows as bits).

    Each returned vector is a bitmask over column ids.
    """
    pivots = {}
    kernel = []
    for j, col in enumerate(columns):
        v, comb = col, 1 << j
        while v:
            p = v.bit_length() - 1
            if p in pivots:
                pv, pc = pivots[p]
                v ^= pv
                comb ^= pc
            else:
                pivots[p] = (v, comb)
                break
        if not v:
            kernel.append(comb)
    return kernel


def _bits(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


class _CycleProblem:
    """The part of the complex a cycle witness can live in."""

    def __init__(self, points, d, n, w):
        self.points, self.d, self.n, self.w = points, d, n, w
        table = enumerate_d_simplices(points, d)
        keep = np.flatnonzero(table.min_norm <= n + EPS_GEO)
        self.tuples = table.tuples(keep)
        self.min_norm = table.min_norm[keep]
        self.max_norm = table.max_norm[keep]
        self.start = self.min_norm <= 1 + EPS_GEO
        self.reach = self.max_norm >= n - EPS_GEO
        self.pos = {s: i for i, s in enumerate(self.tuples)}
        self._collar = {}

    def in_collar(self, f) -> bool:
        c = self._collar.get(f)
        if c is None:
            c = self._collar[f] = _in_collar(self.points, f, self.n, self.w)
        return c

    def good_piece(self, ids) -> bool:
        return bool(self.start[ids].any() and self.reach[ids].any())

    def pieces(self, ids) -> list[list[int]]:
        comps = tuple_components([self.tuples[i] for i in ids])
        return [[self.pos[s] for s in c] for c in comps]

    def score(self, ids) -> float:
        """Best reach among pieces that start in the unit ball."""
        best = -1.0
        for p in self.pieces(ids):
            if self.start[p].any():
                best = max(best, float(self.max_norm[p].max()))
        return best

    def accept(self, ids):
        for p in self.pieces(ids):
            if self.good_piece(p):
                M = [self.tuples[i] for i in p]
                if verify_cycle_witness(self.points, M, self.n, self.w):
                    return sorted(M)
        return None


def _path_witness(prob: _CycleProblem):
    """d = 1: collar-to-unit-ball-to-outside paths are relative cycles."""
    pts, n, w = prob.points, prob.n, prob.w
    nv = np.linalg.norm(pts, axis=1)
    nb = [[] for _ in range(len(pts))]
    for i, (a, b) in enumerate(prob.tuples):
        nb[a].append((b, i))
        nb[b].append((a, i))

    def bfs(sources):
        par = {s: None for s in sources}
        q = deque(sources)
        while q:
            u = q.popleft()
            for v, e in nb[u]:
                if v not in par:
                    par[v] = (u, e)
                    q.append(v)
        return par

    def walk(par, v):
        out = []
        while par.get(v) is not None:
            v, e = par[v]
            out.append(e)
        return out

    inner = bfs([int(i) for i in np.flatnonzero(nv <= 1 + w + EPS_GEO)])
    outer = bfs([int(i) for i in np.flatnonzero(nv >= n - EPS_GEO)])
    for e in np.flatnonzero(prob.start):
        a, b = prob.tuples[e]
        for u, v in ((a, b), (b, a)):
            if u in inner and v in outer:
                mask = 1 << int(e)
                for k in walk(inner, u) + walk(outer, v):
                    mask ^= 1 << k
                got = prob.accept(_bits(mask))
                if got:
                    return got
    return None


def cycle_search(real, d: int, n: float, w: float, max_rounds: int = 40) -> CycleResult:
    """Witness search for a collar-relative d-cycle from ``B_1`` to ``dB_n``.

    Returns verdict 1 with a verified witness, 0 when the relative-cycle
    space restricted to the relevant simplices cannot join the two ends, and
    ``None`` when neither could be established.
    """
    if not 0 < w < n / 4 or not n > 2 + 2 * w:
        raise ValueError("need 0 < w < n/4 and n > 2 + 2w")
    _require_window(real, n + 1)
    pts = _prune(_coords(real), n + 1)
    prob = _CycleProblem(pts, d, n, w)
    if not prob.tuples:
        return CycleResult(0, reason="no simplices")
    labels = face_cluster_labels(SimplexTable(d, np.array(prob.tuples), pts))
    good = np.intersect1d(labels[prob.start], labels[prob.reach])
    if good.size == 0:
        return CycleResult(0, reason="no face crossing")
    if d == 1:
        got = _path_witness(prob)
        if got:
            return CycleResult(1, got, "path")
    undecided = False
    for lab in good.tolist():
        ids = np.flatnonzero(labels == lab)
        local = {int(g): k for k, g in enumerate(ids)}
        rows = {}
        cols = []
        for g in ids.tolist():
            col = 0
            for f in faces(prob.tuples[g]):
                if not prob.in_collar(f):
                    col |= 1 << rows.setdefault(f, len(rows))
            cols.append(col)
        kernel = _gf2_kernel(cols)
        support = 0
        for k in kernel:
            support |= k
        sup_ids = [int(ids[i]) for i in _bits(support)]
        if not any(prob.good_piece(p) for p in prob.pieces(sup_ids)):
            continue
        # kernel pieces: face components of basis vectors, each a relative cycle
        pieces = []
        for k in kernel:
            for p in prob.pieces([int(ids[i]) for i in _bits(k)]):
                m = 0
                for g in p:
                    m |= 1 << local[g]
                pieces.append(m)
        for m in pieces:
            got = prob.accept([int(ids[i]) for i in _bits(m)])
            if got:
                return CycleResult(1, got, "basis")
        got = _random_combinations(prob, ids, kernel, tries=48)
        if got:
            return CycleResult(1, got, "random")
        got = _greedy(prob, ids, pieces, max_rounds)
        if got:
            return CycleResult(1, got, "greedy")
        undecided = True
    if undecided:
        return CycleResult(None, reason="search exhausted")
    return CycleResult(0, reason="relative cycles miss an end")


def _random_combinations(prob, ids, kernel, tries):
    """Random kernel elements; a fixed generator keeps the search deterministic."""
    if len(kernel) < 2:
        return None
    rng = np.random.default_rng(len(kernel))
    for _ in range(tries):
        m = 0
        for k, b in zip(kernel, rng.integers(0, 2, size=len(kernel)).tolist()):
            if b:
                m ^= k
        if m:
            got = prob.accept([int(ids[i]) for i in _bits(m)])
            if got:
                return got
    return None


def _greedy(prob, ids, pieces, max_rounds):
    glob = lambda m: [int(ids[i]) for i in _bits(m)]
    starts = [m for m in pieces if prob.start[glob(m)].any()]
    starts.sort(key=lambda m: -prob.score(glob(m)))
    for cur in starts[:8]:
        best = prob.score(glob(cur))
        for _ in range(max_rounds):
            cand = None
            for m in pieces:
                nxt = cur ^ m
                if not nxt:
                    continue
                sc = prob.score(glob(nxt))
                if sc > best + 1e-12:
                    best, cand = sc, nxt
            if cand is None:
                break
            cur = cand
            if best >= prob.n - EPS_GEO:
                got = prob.accept(glob(cur))
                if got:
                    return got
    return None


def cycle_crossing(real, d: int, n: float, w: float):
    """1, 0 or ``None`` (undetermined); see :func:`cycle_search`."""
    return cycle_search(real, d, n, w).verdict


# ---------------------------------------------------------------------------
# decay fits and the empirical transition


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    r2: float
    mask: tuple

    def __iter__(self):
        return iter((self.slope, self.intercept, self.r2))


def decay_fit(curve) -> DecayFit:
    """Least squares of ``log theta`` against ``r``; nonpositive points masked."""
    curve = list(curve)
    if len(curve) < 5:
        raise ValueError("decay_fit needs at least 5 points")
    r = np.array([c[0] for c in curve], dtype=float)
    th = np.array([c[1] for c in curve], dtype=float)
    mask = th > 0
    if mask.sum() < 3:
        raise ValueError("fewer than 3 positive estimates")
    x, y = r[mask], np.log(th[mask])
    slope, intercept = np.polyfit(x, y, 1)
    res = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(res ** 2))
    r2 = 1.0 if ss_tot <= 1e-300 or ss_res <= 1e-24 * max(ss_tot, 1.0) else 1 - ss_res / ss_tot
    return DecayFit(float(slope), float(intercept), float(r2), tuple(bool(m) for m in mask))


def crossing_threshold(real, d: int, n: float, marks, lam_max: float) -> float:
    """Smallest intensity at which the thinned sample has a face crossing.

    A point is kept at intensity ``lam`` when ``marks * lam_max <= lam``;
    this couples all intensities below ``lam_max`` monotonically, so the
    crossing indicator is a step function of ``lam`` and its jump is found
    by binary search over the sorted marks.  Returns ``inf`` when even
    ``lam_max`` does not cross.
    """
    pts = _coords(real)
    order = np.argsort(marks, kind="stable")
    pts, m = pts[order], np.asarray(marks)[order]

    def crosses(k):
        return crossing_face(pts[:k], d, n) == 1

    if not crosses(len(pts)):
        return math.inf
    lo, hi = 0, len(pts)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if crosses(mid):
            hi = mid
        else:
            lo = mid
    return float(m[hi - 1] * lam_max)


@dataclass
class Bracket:
    lam_lo: float
    lam_hi: float
    lam_c: float
    thresholds: np.ndarray
    target: float

    def crossing_probability(self, lam: float) -> float:
        return float(np.mean(self.thresholds <= lam))


def bracket_transition(D: int, d: int, n: float, lam_lo: float, lam_hi: float,
                       replicas: int, seed: int, target: float = 0.5, iters: int = 40) -> Bracket:
    """Bisection for the intensity where the crossing probability hits ``target``.

    All intensities share one coupled sample per replica (a Poisson sample at
    ``lam_hi`` with uniform thinning marks), so the empirical crossing
    probability is exactly monotone in ``lam`` and bisection is well posed.
    """
    if not 0 < lam_lo < lam_hi:
        raise ValueError("need 0 < lam_lo < lam_hi")
    window = Region.centered_ball(D, n + 1)
    th = np.empty(replicas)
    for i in range(replicas):
        lin = SeedLineage(seed, i)
        real = sample_poisson(window, lam_hi, lin)
        marks = lin.rng("marks").uniform(size=len(real))
        th[i] = crossing_threshold(real.points, d, n, marks, lam_hi)
    lo, hi = lam_lo, lam_hi
    p = lambda lam: float(np.mean(th <= lam))
    if p(lo) > target or p(hi) < target:
        raise ValueError(f"target {target} not bracketed by [{lam_lo}, {lam_hi}]")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if p(mid) >= target:
            hi = mid
        else:
            lo = mid
    return Bracket(lo, hi, 0.5 * (lo + hi), th, target)
