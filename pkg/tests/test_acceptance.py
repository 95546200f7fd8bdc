"""Acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line (printed in the terminal summary and
to stdout) and then asserts.  Run alone with ``pytest tests/test_acceptance.py -v``.
"""
import json
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from faceperc.delaunay import delaunay, outer_boundary, vacancy_flags
from faceperc.enhancement import ThinSpec, gamma, special_mask, xi2_invariance
from faceperc.osss import (InfluenceSpec, explore, exploration_window, influence_pivot_audit, osss_check,
                           poisson_ratio_bound)
from faceperc.percolation import (ThetaSpec, bracket_transition, crossing_face, crossing_star,
                                  crossing_triple, decay_fit, theta_curve)
from faceperc.points import Realization, Region, SeedLineage, sample_poisson
from faceperc.rips import (boundary_mod2, enumerate_d_simplices, face_adjacency, faces, is_cycle,
                           star_adjacency, tuple_components)
from faceperc.runner import ExperimentConfig, run

from oracles import (crossing_bruteforce, face_edges_bruteforce, origin_reach_bruteforce,
                     random_connected_subset, simplices_bruteforce, star_edges_bruteforce)

pytestmark = pytest.mark.acceptance

BRACKET = dict(D=2, d=1, n=10, lam_lo=0.5, lam_hi=3.0, replicas=400, seed=2024)


def record(k, ok, detail, t0):
    detail = f"{detail} ({time.perf_counter() - t0:.1f} s)"
    ACCEPTANCE[k] = (bool(ok), detail)
    print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="module")
def bracket():
    return bracket_transition(**BRACKET)


@pytest.fixture(scope="module")
def osss_run(bracket):
    spec = InfluenceSpec(None, 5, 2.5, bracket.lam_c, 2000, seed=77)
    t0 = time.perf_counter()
    rep = osss_check(spec)
    return rep, time.perf_counter() - t0


def test_c01_boundary_algebra():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    checked = bad = 0
    for D in (2, 3):
        for d in range(1, D + 1):
            tries = 0
            while tries < 200:
                pts = rng.uniform(0, 1.4 if D == 3 else 2.2, (int(rng.integers(15, 35)), D))
                simps = enumerate_d_simplices(pts, d).tuples()
                if len(simps) < 2:
                    continue
                for _ in range(10):
                    A = [s for s in simps if rng.random() < 0.5]
                    B = [s for s in simps if rng.random() < 0.5]
                    bd = boundary_mod2(A)
                    bad += bool(boundary_mod2(bd))
                    bad += boundary_mod2(set(A) ^ set(B)) != bd ^ boundary_mod2(B)
                    checked += 1
                    tries += 1
    ok = bad == 0 and checked >= 200 * 5 and time.perf_counter() - t0 < 60
    record(1, ok, f"{checked} subsets over D in {{2,3}}, d in 1..D; {bad} violations", t0)
    assert ok


def test_c02_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    counts = dict(enum=0, face=0, star=0, crossing=0, explore=0)
    bad = dict(counts)
    for i in range(100):
        d = 1 + i % 2
        m = int(rng.integers(20, 61))
        pts = rng.uniform(-3.2, 3.2, (m, 2))
        simps = enumerate_d_simplices(pts, d)
        bad["enum"] += simps.tuples() != simplices_bruteforce(pts, d)
        bad["face"] += face_adjacency(simps).edge_set() != face_edges_bruteforce(simps.tuples())
        n = 3.0
        bad["crossing"] += crossing_face(pts, d, n) != crossing_bruteforce(pts, d, n)
        sparse = rng.uniform(-5, 5, (int(rng.integers(15, 41)), 2))
        st = enumerate_d_simplices(sparse, d)
        r0 = float(rng.uniform(0.5, 2.5))
        bad["star"] += star_adjacency(st, r0).edge_set() != star_edges_bruteforce(sparse, st.tuples(), r0)
        bad["crossing"] += crossing_star(sparse, d, n, r0) != crossing_bruteforce(sparse, d, n, "star", r0)
        ex = rng.uniform(-4, 4, (int(rng.integers(30, 61)), 2))
        state = explore(Realization(ex, exploration_window(6, 2), 1.0), 1.5, 3)
        inner = ex[np.linalg.norm(ex, axis=1) <= 4]
        bad["explore"] += int(state.crossing) != origin_reach_bruteforce(inner, 3)
        for k in counts:
            counts[k] += 1 + (k == "crossing")
    ok = not any(bad.values()) and min(counts.values()) >= 100 and time.perf_counter() - t0 < 300
    record(2, ok, f"instances {counts}; mismatches {bad}", t0)
    assert ok


def test_c03_cycle_pi():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    bad = 0
    for i in range(100):
        cx = delaunay(rng.uniform(-6, 6, (int(rng.integers(60, 200)), 2)))
        M = random_connected_subset(cx, rng, int(rng.integers(1, 60)))
        F = outer_boundary(cx, M)
        good = bool(F) and is_cycle(F) and len(tuple_components(F)) == 1 and F <= boundary_mod2(cx.tuples(M))
        bad += not good
    ok = bad == 0 and time.perf_counter() - t0 < 120
    record(3, ok, f"100 face-connected Delaunay subsets; {bad} failures", t0)
    assert ok


def test_c04_containment_chain():
    t0 = time.perf_counter()
    tally = {}
    for d, lam, n, reps in ((1, 1.5, 6, 300), (2, 3.0, 5, 40)):
        for i in range(reps):
            real = sample_poisson(Region.centered_ball(2, n + 3.5), lam, SeedLineage(404 + d, i))
            # raises ContainmentViolation on any broken replica
            cyc, face, star = crossing_triple(real, d, n, 2.5, 1.0)
            key = (d, cyc, face, star)
            tally[key] = tally.get(key, 0) + 1
    undetermined = sum(v for k, v in tally.items() if k[1] is None)
    ok = time.perf_counter() - t0 < 600
    record(4, ok, f"cycle=>face=>star on {sum(tally.values())} replicas, no violation; "
                  f"outcomes {sorted((str(k), v) for k, v in tally.items())}; undetermined cycle verdicts "
                  f"{undetermined}", t0)
    assert ok


def test_c05_coupled_monotonicity():
    t0 = time.perf_counter()
    bad = 0
    for d, lam, extra in ((1, 1.2, 0.3), (2, 2.8, 0.5)):
        for i in range(1000):
            lin = SeedLineage(505 + d, i)
            a = sample_poisson(Region.centered_ball(2, 7.5), lam, lin)
            b = a.superpose(extra, lin)
            ind = {}
            for tag, R in (("a", a), ("b", b)):
                for n in (3, 4):
                    ind[tag, n] = (crossing_face(R, d, n), crossing_star(R, d, n, 2.5))
            for n in (3, 4):
                bad += any(x > y for x, y in zip(ind["a", n], ind["b", n]))
            for tag in "ab":
                bad += any(x < y for x, y in zip(ind[tag, 3], ind[tag, 4]))
    el = time.perf_counter() - t0
    ok = bad == 0 and el < 300
    record(5, ok, f"1000 coupled replicas for d=1 and d=2; {bad} monotonicity violations", t0)
    assert ok


def test_c06_influence_pivot():
    t0 = time.perf_counter()
    comp = {lam: poisson_ratio_bound(lam, 30) for lam in (0.5, 1.0, 2.0)}
    comp_ok = all(v <= lam * math.exp(lam) * (1 + 1e-12) for lam, v in comp.items())
    sites = [(i, j) for i in range(-4, 5) for j in range(-4, 5)]
    fails, vol_fails = {}, {}
    worst = {}
    for lam in (0.6, 1.0):
        rows = influence_pivot_audit(InfluenceSpec(None, 5, 2.5, lam, 20000, seed=606), sites)
        fails[lam] = sum(not r.holds for r in rows)
        vol_fails[lam] = sum(not r.holds_volume for r in rows)
        worst[lam] = max(rows, key=lambda r: (r.inf - r.cap * r.piv) / (r.se or 1))
    el = time.perf_counter() - t0
    ok = comp_ok and not any(fails.values()) and el < 1800
    w = {lam: f"x={r.x} Inf={r.inf:.4f} Piv={r.piv:.4f} cap={r.cap:.3f} SE={r.se:.4f}" for lam, r in worst.items()}
    record(6, ok, f"sites failing Inf <= lam e^lam Piv + 3SE: {fails}; with cap mu e^mu, mu = lam 2^D: "
                  f"{vol_fails}; analytic companion {'PASS' if comp_ok else 'FAIL'}; worst {w}", t0)
    assert ok


def test_c07_osss(osss_run, bracket):
    rep, el = osss_run
    t0 = time.perf_counter() - el
    ok = rep.holds and rep.decision_mismatches == 0 and el < 1800
    record(7, ok, f"lam={bracket.lam_c:.4f} (bracket n=10); theta={rep.theta:.4f}; "
                  f"LHS={rep.lhs:.4f} RHS={rep.rhs:.4f} pooled SE={rep.se_pooled:.4f}; "
                  f"{len(rep.sites)} sites, 2000 replicas", t0)
    assert ok


def test_c08_revealment_bound(osss_run):
    rep, el = osss_run
    t0 = time.perf_counter()
    checks = rep.revealment_checks
    fails = [c for c in checks if not c["holds"]]
    ok = bool(checks) and not fails
    record(8, ok, f"{len(checks)} sites with ||x|-s| > 2 sqrt(D); {len(fails)} violations "
                  f"(same run as criterion 7)", t0)
    assert ok


def test_c09_sharpness(bracket):
    t0 = time.perf_counter()
    lam = 0.7 * bracket.lam_c
    curve = theta_curve(ThetaSpec(2, 1, tuple(float(r) for r in range(2, 11)), lam, 20000, seed=909))
    fit = decay_fit([(r, rec.estimate) for r, rec in curve.items()])
    el = time.perf_counter() - t0
    ok = fit.slope < 0 and fit.r2 > 0.9 and el < 1200
    record(9, ok, f"lam=0.7*{bracket.lam_c:.4f}={lam:.4f}; slope={fit.slope:.4f} R2={fit.r2:.4f}; "
                  f"theta_10={curve[10.0].estimate:.4f}", t0)
    assert ok


def _planted_pairs(n, reps):
    """Paired xi2 streams on samples with planted special points."""
    rng = np.random.default_rng(1010)
    mism = active = 0
    for i in range(reps):
        lin = SeedLineage(1011, i)
        real = sample_poisson(Region.centered_ball(2, n + 6), 1.2, lin)
        pts = real.points
        ctrs = [np.array(c) + rng.uniform(-0.5, 0.5, 2) for c in ((-n + 1.5, 0), (0, n - 1.5), (1.5, -1.0))]
        for c in ctrs:
            pts = pts[np.linalg.norm(pts - c, axis=1) > 2.55]
        for c in ctrs:
            u = rng.normal(size=2)
            u /= np.linalg.norm(u)
            pts = np.vstack([pts, [c], c + rng.uniform(0.65, 0.8) * u, c - rng.uniform(0.65, 0.8) * u])
        real = real.with_points(pts)
        sp = special_mask(real, 2.5, 1)
        u1 = lin.rng("xi1").uniform(size=len(pts))
        a = pts[gamma(sp, u1 < 0.9, lin.rng("xi2").uniform(size=len(pts)) < 0.5)]
        b = pts[gamma(sp, u1 < 0.9, lin.rng("xi2_alt").uniform(size=len(pts)) < 0.5)]
        active += len(a) != len(b)
        mism += crossing_face(a, 1, n) != crossing_face(b, 1, n)
    return mism, active


def test_c10_xi2_invariance():
    t0 = time.perf_counter()
    out = {}
    for lam in (0.15, 1.2):
        for n in (3, 5):
            out[lam, n] = xi2_invariance(ThinSpec(lam, 0.9, 0.5, n, 2000, seed=1000))
    planted = {n: _planted_pairs(n, 2000) for n in (3, 5)}
    mism = sum(v["mismatches"] for v in out.values()) + sum(m for m, _ in planted.values())
    el = time.perf_counter() - t0
    ok = mism == 0 and el < 600
    summary = {f"lam={k[0]},n={k[1]}": (v["mismatches"], v["special_points"], v["face_rate"]) for k, v in out.items()}
    record(10, ok, f"Poisson runs (mismatches, special points, face rate): {summary}; planted specials "
                   f"(mismatches, replicas where xi2 changed the thinned set): {planted}", t0)
    assert ok


def test_c11_remark_vacancy():
    t0 = time.perf_counter()
    bad = checked = 0
    for i in range(100):
        real = sample_poisson(Region.centered_box(2, 5), 1.5, SeedLineage(1111, i))
        cx = delaunay(real)
        tri = set(enumerate_d_simplices(real.points, 2).tuples())
        edges = set(enumerate_d_simplices(real.points, 1).tuples())
        for k in np.flatnonzero(~vacancy_flags(cx, real)):
            s = tuple(sorted(cx.simplices[k].tolist()))
            checked += 1
            bad += s not in tri or not all(f in edges for f in faces(s))
    ok = bad == 0 and time.perf_counter() - t0 < 120
    record(11, ok, f"{checked} non-vacant simplices on 100 realizations; {bad} outside the Rips complex", t0)
    assert ok


def test_c12_reproducibility(tmp_path):
    t0 = time.perf_counter()
    docs = [
        {"kind": "theta", "lam": [1.0, 1.3], "r": [2, 4], "replicas": 30, "seed": 12},
        {"kind": "crossing", "lam": [1.4], "r": [4], "r0": 2.5, "replicas": 20, "seed": 12},
        {"kind": "cycle", "lam": [1.6], "r": [5], "r0": 2.5, "w": 1.0, "replicas": 10, "seed": 12},
        {"kind": "delaunay-cycle", "lam": [0.5], "r": [5], "replicas": 10, "seed": 12},
        {"kind": "osss-audit", "lam": [1.2], "r": [3], "s": 1.5, "replicas": 10, "seed": 12},
        {"kind": "enhancement", "lam": [1.2], "r": [3, 5], "r0": 2.5, "p": 0.8, "delta": 0.05,
         "replicas": 10, "seed": 12},
    ]
    diffs = []
    for k, doc in enumerate(docs):
        cfg = ExperimentConfig.from_json(json.dumps(doc))
        a, b = tmp_path / f"a{k}", tmp_path / f"b{k}"
        run(cfg, a, workers=1)
        run(cfg, b, workers=3)
        fa = {p.name: p.read_bytes() for p in sorted(a.iterdir())}
        fb = {p.name: p.read_bytes() for p in sorted(b.iterdir())}
        if fa != fb:
            diffs.append(doc["kind"])
    ok = not diffs
    record(12, ok, f"{len(docs)} configs (every kind) rerun with 1 and 3 workers; differing: {diffs}", t0)
    assert ok


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-v", "-s"]))
