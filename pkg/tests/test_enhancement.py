import numpy as np
import pytest

from faceperc.enhancement import (ThinSpec, detect_special, enhancement_experiment, gamma, gamma_thin,
                                  mark_uniforms, piv_events, special_feasibility_grid, special_mask,
                                  theta_face_thin, theta_star_thin, thinned_crossings, verify_special,
                                  xi2_invariance)
from faceperc.percolation import crossing_face, crossing_star
from faceperc.points import MarkedRealization, Realization, Region, SeedLineage, sample_poisson

R0 = 2.5
BIG = Region.centered_ball(2, 30)


def real_of(pts, region=BIG):
    return Realization(np.asarray(pts, dtype=float).reshape(-1, 2), region, 1.0)


def plant_specials(real, centers, rng, d=1):
    """Clear an ``R0``-ball around each center and plant a special configuration."""
    pts = real.points
    for c in centers:
        pts = pts[np.linalg.norm(pts - c, axis=1) > R0 + 0.05]
    planted = []
    for c in centers:
        ang = rng.uniform(0, 2 * np.pi)
        u = np.array([np.cos(ang), np.sin(ang)])
        a, b = rng.uniform(0.65, 0.8, 2)
        y, z = c + a * u, c - b * u
        grp = []
        for ctr in (y, z):
            grp.append(ctr + (rng.uniform(-0.05, 0.05, (d, 2)) if d > 1 else np.zeros((1, 2))))
        planted.append(len(pts))
        pts = np.vstack([pts, [c], *grp])
    return real.with_points(pts), planted


# detection -------------------------------------------------------------------

def test_special_examples():
    base = [[0, 0], [-0.7, 0], [0.7, 0]]
    reps = detect_special(real_of(base), R0, 1)
    assert [r.point for r in reps] == [0]
    assert reps[0].radius_y == 0 and reps[0].dist_yz == pytest.approx(1.4)
    assert detect_special(real_of(base + [[0.5, 0.9]]), R0, 1) == []


def test_special_d2():
    pts = [[0, 0], [-0.7, 0.05], [-0.7, -0.05], [0.7, 0.05], [0.7, -0.05]]
    assert [r.point for r in detect_special(real_of(pts), R0, 2)] == [0]
    wide = [[0, 0], [-0.7, 0.2], [-0.7, -0.2], [0.7, 0.05], [0.7, -0.05]]  # MEB radius 0.2
    assert detect_special(real_of(wide), R0, 2) == []


def test_special_constraints():
    # groups too close together, too far from x, or x inside a small ball
    assert detect_special(real_of([[0, 0], [-0.6, 0], [0.6, 0]]), R0, 1) == []
    assert detect_special(real_of([[0, 0], [-0.9, 0], [0.7, 0]]), R0, 1) == []
    assert detect_special(real_of([[0, 0], [-0.1, 0], [0.7, 0]]), R0, 1) == []


def test_special_requires_observed_neighbourhood():
    pts = [[0, 0], [-0.7, 0], [0.7, 0]]
    assert detect_special(real_of(pts, Region.centered_ball(2, 2.0)), R0, 1) == []


def test_r0_hypothesis():
    with pytest.raises(ValueError, match="r0 > 2"):
        detect_special(real_of([[0, 0]]), 2.0, 1)
    with pytest.raises(ValueError):
        ThinSpec(1.0, 0.5, 0.5, 3, 10, r0=1.5)


@pytest.mark.parametrize("d", [1, 2])
def test_detector_sound_and_audited(d):
    rng = np.random.default_rng(11 + d)
    found = 0
    for i in range(20):
        real = sample_poisson(Region.centered_ball(2, 10), 0.4, SeedLineage(90 + d, i))
        real, _ = plant_specials(real, [np.array([-4.0, 0]), np.array([4.0, 1.0])], rng, d)
        for rep in detect_special(real, R0, d):
            found += 1
            assert verify_special(real.points, R0, d, rep)
            assert special_feasibility_grid(real, rep.point, R0, d)
    assert found >= 40


def test_detector_incompleteness_is_rare():
    """Grid-feasible but unreported points on random samples (audit)."""
    rng = np.random.default_rng(3)
    missed = reported = 0
    for i in range(30):
        real = sample_poisson(Region.centered_ball(2, 8), 0.15, SeedLineage(93, i))
        mask = special_mask(real, R0, 1)
        for j in range(len(real)):
            if np.linalg.norm(real.points[j]) + R0 > 8:
                continue
            feas = special_feasibility_grid(real, j, R0, 1, step=1 / 32)
            reported += mask[j]
            missed += feas and not mask[j]
            assert not (mask[j] and not feas)
    # for d = 1 the witness centers are the points themselves, so nothing is missed
    assert missed == 0


# thinning --------------------------------------------------------------------

def test_gamma_cases():
    assert gamma([False], [True], [False]).tolist() == [True]
    assert gamma([True], [True], [False]).tolist() == [False]
    assert gamma([True], [True], [True]).tolist() == [True]
    assert gamma([False, True], [False, False], [True, True]).tolist() == [False, False]


def test_gamma_thin_identity_case():
    real = real_of([[0, 0], [-0.7, 0], [0.7, 0], [5, 5]])
    ones = np.ones(4, dtype=bool)
    t = gamma_thin(MarkedRealization(real, ones, ones), R0, 1)
    assert t.ids.tolist() == [0, 1, 2, 3] and t.special.tolist() == [True, False, False, False]
    t = gamma_thin(MarkedRealization(real, ones, ~ones), R0, 1)
    assert t.ids.tolist() == [1, 2, 3]


def test_q_one_is_classical_thinning():
    spec = ThinSpec(1.2, 0.8, 1.0, 4, 40, seed=5)
    for i in range(spec.replicas):
        lin = SeedLineage(spec.seed, i)
        real = sample_poisson(spec.window, spec.lam, lin)
        u1, _ = mark_uniforms(lin, len(real))
        face, star, _ = thinned_crossings(spec, i)
        pts = real.points[u1 < spec.p]
        assert face == crossing_face(pts, 1, 4) and star == crossing_star(pts, 1, 4, R0)


def test_q_one_matches_poisson_p_lambda_in_law():
    spec = ThinSpec(1.5, 0.8, 1.0, 4, 600, seed=6)
    thin = theta_star_thin(spec)["estimate"]
    direct = np.mean([crossing_star(sample_poisson(spec.window, 1.2, SeedLineage(7, i)), 1, 4, R0)
                      for i in range(600)])
    se = np.sqrt(thin * (1 - thin) / 600 + direct * (1 - direct) / 600)
    assert abs(thin - direct) <= 4 * se + 1e-9


def test_p_zero_gives_zero():
    spec = ThinSpec(1.5, 0.0, 0.5, 3, 30, seed=8)
    assert theta_face_thin(spec)["estimate"] == 0 and theta_star_thin(spec)["estimate"] == 0


def test_xi2_invariance_on_planted_samples():
    rng = np.random.default_rng(9)
    for i in range(40):
        real = sample_poisson(Region.centered_ball(2, 11), 1.3, SeedLineage(94, i))
        ctrs = [np.array(c) + rng.uniform(-0.5, 0.5, 2) for c in ((-5, 0), (0, 5), (4, -3))]
        real, planted = plant_specials(real, ctrs, rng)
        sp = special_mask(real, R0, 1)
        assert sp[planted].all()
        xi1 = rng.random(len(real)) < 0.9
        results = set()
        for _ in range(4):
            xi2 = rng.random(len(real)) < 0.5
            pts = real.points[gamma(sp, xi1, xi2)]
            results.add((crossing_face(pts, 1, 3), crossing_face(pts, 1, 5)))
        assert len(results) == 1


def test_xi2_invariance_threshold_for_edges():
    """For d = 1 the two edges at a special point share it, so n must exceed 2.75."""
    pts = np.array([[1.75, 0], [0.9, 0], [2.6, 0]])
    real = real_of(pts)
    sp = special_mask(real, R0, 1)
    assert sp.tolist() == [True, False, False]
    on = pts[gamma(sp, [1, 1, 1], [1, 1, 1])]
    off = pts[gamma(sp, [1, 1, 1], [0, 0, 0])]
    assert crossing_face(on, 1, 2.5) == 1 and crossing_face(off, 1, 2.5) == 0
    assert crossing_face(on, 1, 3) == crossing_face(off, 1, 3) == 0


def test_xi2_invariance_paired_streams():
    out = xi2_invariance(ThinSpec(1.2, 0.9, 0.5, 3, 60, seed=10))
    assert out["mismatches"] == 0


def test_monotone_in_p_and_q():
    for i in range(30):
        lin = SeedLineage(12, i)
        real = sample_poisson(Region.centered_ball(2, 10), 1.3, lin)
        u1, u2 = mark_uniforms(lin, len(real))
        sp = special_mask(real, R0, 1)
        prev = (0, 0)
        for p, q in [(0.5, 0.2), (0.7, 0.2), (0.7, 0.6), (0.95, 0.9)]:
            pts = real.points[gamma(sp, u1 < p, u2 < q)]
            cur = (crossing_face(pts, 1, 4), crossing_star(pts, 1, 4, R0))
            assert cur[0] <= cur[1]
            assert cur >= prev and cur[0] >= prev[0] and cur[1] >= prev[1]
            prev = cur


# pivot events ----------------------------------------------------------------

def bridge():
    inner = np.c_[np.arange(0.45, 3.2, 0.9), np.zeros(4)]
    outer = np.c_[np.arange(6.15, 8.9, 0.9), np.zeros(4)]
    return np.vstack([inner, outer]), np.array([4.05, 0.0])


def test_piv_empty():
    res = piv_events([0.0, 0.0], 1, None, 4, np.zeros((0, 2)), [], [], True, True, R0, 1)
    assert (res.with_one, res.with_zero) == (0, 0) and not res.pivotal


def test_piv_bridge_point():
    pts, x = bridge()
    ones = np.ones(len(pts), dtype=bool)
    assert crossing_star(pts, 1, 8, R0) == 0
    for mark in (True, False):
        res = piv_events(x, 1, None, 8, pts, ones, ones, mark, True, R0, 1)
        assert res.pivotal and res.with_one == 1
        # x is not special, so xi2 at x never matters
        assert not piv_events(x, 2, None, 8, pts, ones, ones, True, mark, R0, 1).pivotal


def test_piv_phi_edit():
    pts = np.array([[1.75, 0], [0.9, 0], [2.6, 0], [5, 0]])
    x = np.array([9.0, 9.0])
    zeros = np.zeros(len(pts), dtype=bool)
    ones = ~zeros
    # with xi2 = 0 the special point at (1.75, 0) is removed; phi restores it only if nearby
    base = piv_events(x, 1, None, 2.5, pts, ones, zeros, True, True, R0, 1)
    far = piv_events(x, 1, 1.0, 2.5, pts, ones, zeros, True, True, R0, 1)
    near = piv_events(np.array([3.0, 3.0]), 1, 3.0, 2.5, pts, ones, zeros, True, True, R0, 1)
    assert base.with_one == 0 and far.with_one == 0
    assert near.with_zero == 1
    assert piv_events(x, 1, 0, 2.5, pts, ones, zeros, True, True, R0, 1) == base
    with pytest.raises(ValueError):
        piv_events(x, 3, None, 2.5, pts, ones, zeros, True, True, R0, 1)


# enhancement experiment ------------------------------------------------------

def test_enhancement_trivial_cases():
    rows = enhancement_experiment(1.2, 0.8, 0.0, [3, 4], 20, seed=1, q_left=0.5, q_right=0.5)
    for r in rows:
        assert r.left == r.right and r.ordering == "="
    with pytest.raises(ValueError):
        enhancement_experiment(1.2, 0.1, 0.2, [3], 5)


def test_enhancement_monotone_in_p():
    rows = enhancement_experiment(1.2, 0.7, 0.1, [3, 5], 40, seed=2, q_left=0.5, q_right=0.5)
    for r in rows:
        assert r.left["estimate"] <= r.right["estimate"]
        assert r.face_left["estimate"] <= r.left["estimate"]
