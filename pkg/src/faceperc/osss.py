"""Exploration algorithm, revealment, influence and pivot estimators.

Boxes are ``Q_1(x) = x + [-1, 1]^D`` for integer sites ``x``.  The rooted
event throughout is ``o ~> dB_r(o)``: the face cluster of the simplices with
vertex ``o`` (the origin, always present) reaches norm ``r``.

Influence and pivot estimators use common random numbers: every site of one
replica is edited against the same base sample, and the edit draws of all
sites come from one per-replica stream in site order.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import asdict, dataclass, field
from itertools import product

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import poisson

from .geometry import EPS_GEO, point_simplex_distance
from .percolation import WindowError, face_labels, origin_reach
from .points import Region, SeedLineage, sample_poisson
from .rips import UnionFind, enumerate_d_simplices, unit_pairs
from .stats import standard_error, wilson_interval


# ---------------------------------------------------------------------------
# sites and boxes


def site_grid(L: float, D: int) -> np.ndarray:
    """``I_L`` in lexicographic order."""
    k = int(math.floor(L))
    axes = [np.arange(-k, k + 1)] * D
    g = np.array(list(product(*axes)), dtype=np.int64)
    return g[np.linalg.norm(g, axis=1) <= L + EPS_GEO]


def box_norm_range(x) -> tuple[float, float]:
    """Smallest and largest Euclidean norm over ``Q_1(x)``."""
    a = np.abs(np.asarray(x, dtype=float))
    return float(np.linalg.norm(np.maximum(a - 1, 0))), float(np.linalg.norm(a + 1))


def phase_one_sites(s: float, D: int) -> list[tuple]:
    """Sites whose box meets the closed annulus ``s-1 <= |y| <= s+1``."""
    k = int(math.ceil(s + 2))
    out = []
    for x in product(range(-k, k + 1), repeat=D):
        lo, hi = box_norm_range(x)
        if lo <= s + 1 + EPS_GEO and hi >= s - 1 - EPS_GEO:
            out.append(tuple(x))
    return sorted(out)


def box_point_distance(x, v) -> float:
    d = np.maximum(np.abs(np.asarray(v, dtype=float) - np.asarray(x, dtype=float)) - 1.0, 0.0)
    return float(np.linalg.norm(d))


def sites_near(v, L: float) -> list[tuple]:
    """Sites in ``I_L`` whose box is within distance 1 of the point ``v``."""
    v = np.asarray(v, dtype=float)
    lo = np.ceil(v - 2 - EPS_GEO).astype(int)
    hi = np.floor(v + 2 + EPS_GEO).astype(int)
    out = []
    for x in product(*[range(a, b + 1) for a, b in zip(lo, hi)]):
        if box_point_distance(x, v) <= 1 + EPS_GEO and np.linalg.norm(x) <= L + EPS_GEO:
            out.append(tuple(x))
    return out


def exploration_window(L: float, D: int) -> Region:
    return Region.centered_box(D, L + 1)


# ---------------------------------------------------------------------------
# exploration


@dataclass
class ExplorationState:
    s: float
    r: float
    L: float
    d: int
    phase_one: list
    revealed: list
    decision: str = "pending"
    cluster_vertices: list = field(default_factory=list)
    witness: dict = field(default_factory=dict)
    reach: float = -1.0

    @property
    def revealed_set(self) -> set:
        return set(self.revealed)

    @property
    def crossing(self) -> bool:
        return self.decision == "crossing"


def _edge_meets_sphere(pts, u, v, s) -> bool:
    nu, nv = np.linalg.norm(pts[u]), np.linalg.norm(pts[v])
    if max(nu, nv) < s - EPS_GEO:
        return False
    return point_simplex_distance(np.zeros(pts.shape[1]), pts[[u, v]]) <= s + EPS_GEO


def explore(real, s: float, r: float, L: float | None = None, d: int = 1) -> ExplorationState:
    """Run the exploration to termination and decide ``o ~> dB_r``.

    The next box is always the lexicographically smallest eligible site.
    Eligibility only grows as boxes are revealed, so the terminal revealed
    set does not depend on the order; the order fixes the visit log.
    """
    pts = np.asarray(getattr(real, "points", real), dtype=float)
    D = pts.shape[1]
    if L is None:
        L = 2 * r
    if L < 2 * r - EPS_GEO:
        raise ValueError("need L >= 2r")
    if not 0 < s <= r:
        raise ValueError("need 0 < s <= r")
    region = getattr(real, "region", None)
    if region is not None and not region.contains_region(exploration_window(L, D)):
        raise WindowError("realization window must contain [-L-1, L+1]^D")
    if d == 1:
        return _explore_d1(pts, s, r, L)
    return _explore_generic(pts, s, r, L, d)


def _explore_d1(pts, s, r, L) -> ExplorationState:
    D = pts.shape[1]
    n = len(pts)
    allp = np.vstack([pts, np.zeros((1, D))])
    o = n
    nb = [[] for _ in range(n + 1)]
    for a, b in unit_pairs(allp).tolist():
        nb[a].append(b)
        nb[b].append(a)
    tree = cKDTree(pts) if n else None
    revealed_pt = np.zeros(n + 1, dtype=bool)
    uf = UnionFind(n + 1)
    members = {i: [i] for i in range(n + 1)}
    flagged = np.zeros(n + 1, dtype=bool)
    in_C = np.zeros(n + 1, dtype=bool)
    heap = []
    pusher = {}
    state = ExplorationState(s, r, L, 1, phase_one_sites(s, D), [])
    revealed_sites = set()

    def enter_C(v):
        in_C[v] = True
        for x in sites_near(allp[v], L):
            if x not in revealed_sites and x not in pusher:
                pusher[x] = v
                heapq.heappush(heap, x)

    def mark(root):
        if not flagged[root]:
            flagged[root] = True
            for v in members[root]:
                if not in_C[v]:
                    enter_C(v)

    def reveal_point(p):
        revealed_pt[p] = True
        for q in nb[p]:
            if not revealed_pt[q]:
                continue
            ra, rb = uf.find(p), uf.find(q)
            if ra != rb:
                fa, fb = flagged[ra], flagged[rb]
                newly = members[rb] if fa and not fb else members[ra] if fb and not fa else []
                newly = list(newly)
                root = uf.union(ra, rb)
                other = rb if root == ra else ra
                members[root].extend(members.pop(other))
                flagged[root] = fa or fb
                for v in newly:
                    if not in_C[v]:
                        enter_C(v)
            else:
                root = ra
            if _edge_meets_sphere(allp, p, q, s):
                mark(root)

    def reveal_site(x):
        revealed_sites.add(x)
        state.revealed.append(x)
        if tree is None:
            return
        for p in sorted(tree.query_ball_point(np.asarray(x, float), 1 + EPS_GEO, p=np.inf)):
            if not revealed_pt[p]:
                reveal_point(p)

    reveal_point(o)
    for x in state.phase_one:
        reveal_site(x)
    while heap:
        x = heapq.heappop(heap)
        if x in revealed_sites:
            continue
        state.witness[x] = int(pusher[x])
        reveal_site(x)
    root = uf.find(o)
    state.cluster_vertices = sorted(int(v) for v in np.flatnonzero(in_C) if v != o)
    if len(members[root]) > 1:
        state.reach = float(np.linalg.norm(allp[members[root]], axis=1).max())
    state.decision = "crossing" if state.reach >= r - EPS_GEO else "no-crossing"
    return state


def _revealed_points(pts, sites) -> np.ndarray:
    if len(pts) == 0 or not sites:
        return np.zeros(len(pts), dtype=bool)
    S = np.array(sorted(sites), dtype=float)
    tree = cKDTree(S)
    d, _ = tree.query(pts, p=np.inf)
    return d <= 1 + EPS_GEO


def cluster_vertices_C(pts, revealed_mask, s, d):
    """Vertex ids of revealed face clusters meeting ``dB_s`` (origin appended last)."""
    D = pts.shape[1]
    allp = np.vstack([pts, np.zeros((1, D))])
    ids = np.concatenate([np.flatnonzero(revealed_mask), [len(pts)]])
    table = enumerate_d_simplices(allp[ids], d)
    if len(table) == 0:
        return set(), None, table, ids
    lab = face_labels(table)
    meets = (table.min_norm <= s + EPS_GEO) & (table.max_norm >= s - EPS_GEO)
    good = np.isin(lab, lab[meets])
    verts = {int(ids[v]) for v in np.unique(table.simplices[good])}
    return verts, lab, table, ids


def _explore_generic(pts, s, r, L, d) -> ExplorationState:
    """Reference exploration that recomputes the clusters after every box."""
    D = pts.shape[1]
    allp = np.vstack([pts, np.zeros((1, D))])
    state = ExplorationState(s, r, L, d, phase_one_sites(s, D), [])
    revealed = set(state.phase_one)
    state.revealed.extend(state.phase_one)
    while True:
        mask = _revealed_points(pts, revealed)
        verts, _, _, _ = cluster_vertices_C(pts, mask, s, d)
        elig = {}
        for v in sorted(verts):
            for x in sites_near(allp[v], L):
                if x not in revealed and x not in elig:
                    elig[x] = v
        if not elig:
            break
        x = min(elig)
        state.witness[x] = elig[x]
        revealed.add(x)
        state.revealed.append(x)
    mask = _revealed_points(pts, revealed)
    verts, lab, table, ids = cluster_vertices_C(pts, mask, s, d)
    state.cluster_vertices = sorted(v for v in verts if v != len(pts))
    o_local = len(ids) - 1
    if lab is not None:
        at_o = np.any(table.simplices == o_local, axis=1)
        if at_o.any():
            mine = np.isin(lab, lab[at_o])
            state.reach = float(table.max_norm[mine].max())
    state.decision = "crossing" if state.reach >= r - EPS_GEO else "no-crossing"
    return state


def audit_visit_log(real, state: ExplorationState) -> bool:
    """Post-hoc check of the distance-1 rule for every phase-two box."""
    pts = np.asarray(getattr(real, "points", real), dtype=float)
    allp = np.vstack([pts, np.zeros((1, pts.shape[1]))])
    first = set(state.phase_one)
    if state.revealed[:len(first)] != sorted(first):
        return False
    seen = set()
    for x in state.revealed:
        if x in seen:
            return False
        seen.add(x)
        if x in first:
            continue
        v = state.witness.get(x)
        if v is None or box_point_distance(x, allp[v]) > 1 + EPS_GEO:
            return False
        if np.linalg.norm(x) > state.L + EPS_GEO:
            return False
    return True


# ---------------------------------------------------------------------------
# Monte Carlo specs and estimates


@dataclass(frozen=True)
class InfluenceSpec:
    x: tuple | None
    r: float
    s: float
    lam: float
    replicas: int
    seed: int = 0
    D: int = 2
    d: int = 1
    L: float | None = None

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("need r >= 1")
        if self.s > self.r:
            raise ValueError("need s <= r")
        if self.replicas < 1:
            raise ValueError("need at least one replica")

    @property
    def L_eff(self) -> float:
        return 2 * self.r if self.L is None else self.L

    @property
    def window(self) -> Region:
        return exploration_window(self.L_eff, self.D)


@dataclass(frozen=True)
class Estimate:
    mean: float
    se: float
    n: int
    successes: int | None = None

    @property
    def ci(self) -> tuple[float, float]:
        if self.successes is not None:
            return wilson_interval(self.successes, self.n)
        return (self.mean - 1.959963984540054 * self.se, self.mean + 1.959963984540054 * self.se)

    @staticmethod
    def of_bits(bits) -> "Estimate":
        bits = np.asarray(bits)
        return Estimate(float(bits.mean()), standard_error(bits), len(bits), int(bits.sum()))


def _base(spec: InfluenceSpec, replica: int):
    return sample_poisson(spec.window, spec.lam, SeedLineage(spec.seed, replica))


def _prune(pts, radius):
    return np.ascontiguousarray(pts[np.linalg.norm(pts, axis=1) <= radius + 2 * EPS_GEO])


def _reach(pts, d):
    return origin_reach(pts, d)


def _reach_edit(base, x, new, d):
    if d == 1:
        from ._fast import reach_edit_d1
        return float(reach_edit_d1(base, np.asarray(x, dtype=float), 1.0 + 0.0, np.ascontiguousarray(new)))
    keep = np.any(np.abs(base - np.asarray(x)) > 1.0, axis=1)
    return origin_reach(np.vstack([base[keep], new]), d)


def _reach_add(base, y, d):
    if d == 1:
        from ._fast import reach_add_d1
        return float(reach_add_d1(base, np.ascontiguousarray(y.reshape(1, -1))))
    return origin_reach(np.vstack([base, y.reshape(1, -1)]), d)


def influence_flip(base_points, x, new_contents, r: float, d: int = 1) -> int:
    """Whether replacing the points of ``Q_1(x)`` by ``new_contents`` flips ``o ~> dB_r``."""
    base = _prune(np.asarray(base_points, dtype=float), r + 1)
    new = np.asarray(new_contents, dtype=float).reshape(-1, base.shape[1])
    new = _prune(new, r + 1) if len(new) else new
    before = _reach(base, d) >= r - EPS_GEO
    after = _reach_edit(base, x, new, d) >= r - EPS_GEO
    return int(before != after)


@dataclass
class FlipTable:
    """Per replica and site: influence flips, pivot flips, and the base indicator."""

    sites: np.ndarray
    inf: np.ndarray
    piv: np.ndarray
    base: np.ndarray
    reach: np.ndarray
    n_points: np.ndarray


def flip_table(spec: InfluenceSpec, sites, replicas=None) -> FlipTable:
    """Influence and pivot flip bits for all ``sites`` on shared base samples.

    Boxes whose nearest point is farther than ``r + 1`` from ``o`` cannot
    affect the event and are skipped (their bits are 0), but their edit draws
    are still consumed so the streams do not depend on the site list.
    """
    sites = np.asarray(sites, dtype=np.int64).reshape(-1, spec.D)
    ids = list(range(spec.replicas)) if replicas is None else list(replicas)
    S, R = len(sites), len(ids)
    mu = spec.lam * 2.0 ** spec.D
    relevant = np.array([box_norm_range(x)[0] <= spec.r + 1 for x in sites], dtype=bool)
    inf = np.zeros((R, S), dtype=np.int8)
    piv = np.zeros((R, S), dtype=np.int8)
    base_bits = np.zeros(R, dtype=np.int8)
    reach = np.zeros(R)
    npts = np.zeros(R, dtype=np.int64)
    sites_f = sites.astype(float)
    for k, i in enumerate(ids):
        lin = SeedLineage(spec.seed, i)
        real = sample_poisson(spec.window, spec.lam, lin)
        npts[k] = len(real)
        base = _prune(real.points, spec.r + 1)
        rb = _reach(base, spec.d)
        reach[k] = rb
        b0 = rb >= spec.r - EPS_GEO
        base_bits[k] = b0
        g_res = lin.rng("resample")
        counts = g_res.poisson(mu, size=S)
        fresh = g_res.uniform(-1.0, 1.0, size=(int(counts.sum()), spec.D))
        offs = np.concatenate([[0], np.cumsum(counts)])
        add = lin.rng("pivot").uniform(-1.0, 1.0, size=(S, spec.D)) + sites_f
        for j in np.flatnonzero(relevant):
            new = fresh[offs[j]:offs[j + 1]] + sites_f[j]
            new = _prune(new, spec.r + 1)
            b1 = _reach_edit(base, sites_f[j], new, spec.d) >= spec.r - EPS_GEO
            inf[k, j] = b1 != b0
            if not b0:
                piv[k, j] = _reach_add(base, add[j], spec.d) >= spec.r - EPS_GEO
            # adding a point never destroys the event, so b0 = 1 gives no pivot
    return FlipTable(sites, inf, piv, base_bits, reach, npts)


def influence_estimate(x, spec: InfluenceSpec) -> Estimate:
    """Frequency that resampling ``Q_1(x)`` flips ``o ~> dB_r``."""
    tab = flip_table(spec, [x])
    return Estimate.of_bits(tab.inf[:, 0])


def pivot_estimate(x, spec: InfluenceSpec) -> Estimate:
    """Frequency that one uniform point added in ``Q_1(x)`` flips ``o ~> dB_r``."""
    tab = flip_table(spec, [x])
    return Estimate.of_bits(tab.piv[:, 0])


def pivot_direction_violations(spec: InfluenceSpec, sites, replicas=None) -> int:
    """Replicas/sites where adding a point turned the event from 1 to 0."""
    sites = np.asarray(sites, dtype=np.int64).reshape(-1, spec.D)
    ids = range(spec.replicas) if replicas is None else replicas
    bad = 0
    for i in ids:
        lin = SeedLineage(spec.seed, i)
        base = _prune(_base(spec, i).points, spec.r + 1)
        b0 = _reach(base, spec.d) >= spec.r - EPS_GEO
        add = lin.rng("pivot").uniform(-1.0, 1.0, size=(len(sites), spec.D)) + sites
        for y in add:
            if b0 and not _reach_add(base, y, spec.d) >= spec.r - EPS_GEO:
                bad += 1
    return bad


def revealment_table(spec: InfluenceSpec, sites, s_values=None, replicas=None) -> dict:
    """Per s: boolean matrix (replica x site) of revealed boxes, plus decisions."""
    sites = [tuple(int(v) for v in x) for x in np.asarray(sites).reshape(-1, spec.D)]
    pos = {x: j for j, x in enumerate(sites)}
    s_values = [spec.s] if s_values is None else list(s_values)
    ids = list(range(spec.replicas)) if replicas is None else list(replicas)
    out = {}
    for s in s_values:
        rev = np.zeros((len(ids), len(sites)), dtype=np.int8)
        dec = np.zeros(len(ids), dtype=np.int8)
        for k, i in enumerate(ids):
            st = explore(_base(spec, i), s, spec.r, spec.L_eff, spec.d)
            for x in st.revealed:
                j = pos.get(x)
                if j is not None:
                    rev[k, j] = 1
            dec[k] = st.crossing
        out[s] = (rev, dec)
    return out


def revealment_estimate(x, spec: InfluenceSpec) -> Estimate:
    """Frequency that the exploration reveals ``Q_1(x)``."""
    x = tuple(int(v) for v in x)
    if np.linalg.norm(x) > spec.L_eff + EPS_GEO:
        raise ValueError("site outside I_L")
    rev, _ = revealment_table(spec, [x])[spec.s]
    return Estimate.of_bits(rev[:, 0])


# ---------------------------------------------------------------------------
# analytic companion


def poisson_ratios(lam: float, k_max: int) -> np.ndarray:
    """``P(M >= k) / P(M = k-1)`` for ``k = 1..k_max``, ``M ~ Poisson(lam)``.

    Uses the series ``sum_{j>=1} lam^j / (k (k+1) ... (k+j-1))``, which has
    only positive terms and no factorial overflow.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    out = np.empty(k_max)
    for k in range(1, k_max + 1):
        term, total, j = 1.0, 0.0, 0
        while True:
            term *= lam / (k + j)
            total += term
            j += 1
            if term < 1e-17 * total:
                break
        out[k - 1] = total
    return out


def poisson_ratios_direct(lam: float, k_max: int) -> np.ndarray:
    """The same ratios from library survival and mass functions."""
    k = np.arange(1, k_max + 1)
    return poisson.sf(k - 1, lam) / poisson.pmf(k - 1, lam)


def poisson_ratio_bound(lam: float, k_max: int) -> float:
    """Largest ratio over ``k <= k_max``; checked against ``lam * e^lam``."""
    r = poisson_ratios(lam, k_max)
    m = float(r.max())
    cap = lam * math.exp(lam)
    if m > cap * (1 + 1e-12):
        raise AssertionError(f"ratio {m} exceeds lam e^lam = {cap}")
    return m


# ---------------------------------------------------------------------------
# joint audits


@dataclass
class SiteRow:
    x: tuple
    delta: float
    delta_se: float
    inf: float
    inf_se: float
    piv: float
    piv_se: float


@dataclass
class OsssReport:
    spec: dict
    theta: float
    theta_se: float
    lhs: float
    rhs: float
    se_pooled: float
    holds: bool
    sites: list
    integrated: dict = field(default_factory=dict)
    revealment_checks: list = field(default_factory=list)
    decision_mismatches: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sites"] = [asdict(s) for s in self.sites]
        return d


def _rhs_with_se(rev, inf):
    """``sum_x mean(rev_x) mean(inf_x)`` and a delta-method standard error."""
    R = rev.shape[0]
    dm = rev.mean(axis=0)
    im = inf.mean(axis=0)
    rhs = float(dm @ im)
    psi = rev @ im + inf @ dm
    se = float(np.std(psi, ddof=1) / math.sqrt(R)) if R > 1 else float("nan")
    return rhs, se


def osss_check(spec: InfluenceSpec, s_grid=None, reveal_bound: bool = True) -> OsssReport:
    """Both sides of the OSSS inequality over ``I_L`` on shared base samples.

    The fixed-``s`` form uses ``spec.s``.  With ``s_grid`` the report also
    carries the s-integrated form ``r theta (1 - theta)`` against
    ``sum_x (int_0^r delta_s(x) ds) Inf(x)`` by the trapezoid rule; the two
    forms are labelled separately.
    """
    sites = site_grid(spec.L_eff, spec.D)
    R = spec.replicas
    tab = flip_table(spec, sites)
    s_vals = [spec.s] + ([s for s in s_grid if s != spec.s] if s_grid is not None else [])
    rt = revealment_table(spec, sites, s_vals)
    rev, dec = rt[spec.s]
    mismatches = int(np.sum(dec != tab.base))
    theta = float(tab.base.mean())
    theta_se = standard_error(tab.base)
    lhs = theta * (1 - theta)
    lhs_se = abs(1 - 2 * theta) * theta_se
    rhs, rhs_se = _rhs_with_se(rev.astype(float), tab.inf.astype(float))
    pooled = math.sqrt(lhs_se ** 2 + rhs_se ** 2)
    rows = []
    for j, x in enumerate(sites):
        rows.append(SiteRow(tuple(int(v) for v in x), float(rev[:, j].mean()), standard_error(rev[:, j]),
                            float(tab.inf[:, j].mean()), standard_error(tab.inf[:, j]),
                            float(tab.piv[:, j].mean()), standard_error(tab.piv[:, j])))
    rep = OsssReport(asdict(spec), theta, theta_se, lhs, rhs, pooled, lhs <= rhs + 3 * pooled, rows,
                     decision_mismatches=mismatches)
    if s_grid is not None:
        grid = sorted(s_vals)
        dint = getattr(np, "trapezoid", None) or np.trapz
        per = np.stack([rt[s][0].astype(float) for s in grid])  # (s, R, S)
        integ = dint(per, x=grid, axis=0)
        rhs_i, se_i = _rhs_with_se(integ, tab.inf.astype(float))
        lhs_i = spec.r * lhs
        pooled_i = math.sqrt((spec.r * lhs_se) ** 2 + se_i ** 2)
        rep.integrated = {"s_grid": grid, "lhs": lhs_i, "rhs": rhs_i, "se_pooled": pooled_i,
                          "holds": lhs_i <= rhs_i + 3 * pooled_i}
    if reveal_bound:
        rep.revealment_checks = revealment_bound_checks(spec, sites, rev, tab.reach)
    return rep


def revealment_bound_checks(spec: InfluenceSpec, sites, rev, reach) -> list[dict]:
    """``delta_s(x) <= 4^D theta_rho`` with ``rho = ||x| - s| - 2 sqrt(D)``.

    ``theta_rho`` is read from the rooted reach of the same base samples,
    which is exact for ``rho <= r``.
    """
    out = []
    c = 4 ** spec.D
    for j, x in enumerate(np.asarray(sites)):
        gap = abs(np.linalg.norm(x) - spec.s)
        if gap <= 2 * math.sqrt(spec.D):
            continue
        rho = gap - 2 * math.sqrt(spec.D)
        if rho > spec.r:
            continue
        tb = (reach >= rho - EPS_GEO).astype(float)
        th, th_se = float(tb.mean()), standard_error(tb)
        de, de_se = float(rev[:, j].mean()), standard_error(rev[:, j])
        se = math.sqrt(de_se ** 2 + (c * th_se) ** 2)
        out.append({"x": tuple(int(v) for v in x), "rho": rho, "delta": de, "theta_rho": th,
                    "bound": c * th, "se": se, "holds": de <= c * th + 3 * se})
    return out


@dataclass
class InfluencePivotRow:
    x: tuple
    inf: float
    piv: float
    se: float
    cap: float
    holds: bool
    cap_volume: float
    holds_volume: bool


def influence_pivot_audit(spec: InfluenceSpec, sites) -> list[InfluencePivotRow]:
    """``Inf(x) <= lam e^lam Piv(x) + 3 SE`` per site from one flip table.

    The companion column uses the mean box count ``mu = lam 2^D`` in place
    of ``lam``.
    """
    tab = flip_table(spec, sites)
    cap = spec.lam * math.exp(spec.lam)
    mu = spec.lam * 2 ** spec.D
    cap_v = mu * math.exp(mu)
    out = []
    for j, x in enumerate(tab.sites):
        a = tab.inf[:, j].astype(float)
        b = tab.piv[:, j].astype(float)
        se = standard_error(a - cap * b)
        se_v = standard_error(a - cap_v * b)
        out.append(InfluencePivotRow(tuple(int(v) for v in x), float(a.mean()), float(b.mean()), se, cap,
                                     a.mean() <= cap * b.mean() + 3 * se, cap_v,
                                     a.mean() <= cap_v * b.mean() + 3 * se_v))
    return out
