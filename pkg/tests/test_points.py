import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from faceperc.points import (GridIndex, MarkedRealization, Realization, Region, SeedLineage, sample_poisson,
                             with_origin)

BOX = Region.centered_box(2, 5.0)


def test_region_validation_and_volume():
    with pytest.raises(ValueError):
        Region.box((0, 0), (1, 0))
    with pytest.raises(ValueError):
        Region.centered_ball(2, 0)
    assert Region.centered_box(3, 1).volume == 8
    assert Region.centered_ball(2, 2).volume == pytest.approx(4 * math.pi)
    assert Region.centered_ball(3, 1).volume == pytest.approx(4 / 3 * math.pi)
    assert Region.from_dict(BOX.to_dict()) == BOX


def test_sample_inside_region_and_deterministic():
    for reg in (BOX, Region.centered_ball(3, 3.0)):
        a = sample_poisson(reg, 2.0, SeedLineage(5, 3))
        b = sample_poisson(reg, 2.0, SeedLineage(5, 3))
        c = sample_poisson(reg, 2.0, SeedLineage(5, 4))
        assert reg.contains(a.points).all()
        assert np.array_equal(a.points, b.points)
        assert not np.array_equal(a.points, c.points)


def test_tiny_intensity_gives_empty_sample():
    counts = [len(sample_poisson(Region.centered_box(2, 0.5), 1e-9, SeedLineage(1, i))) for i in range(200)]
    assert sum(counts) == 0


def test_poisson_count_mean():
    reg = Region.centered_box(2, 5.0)  # volume 100
    n = np.array([len(sample_poisson(reg, 2.0, SeedLineage(2, i))) for i in range(10000)])
    assert abs(n.mean() - 200) <= 3 * math.sqrt(200 / 10000)
    assert abs(n.var(ddof=1) / 200 - 1) < 0.1


def test_uniform_in_ball_radial_law():
    real = sample_poisson(Region.centered_ball(2, 1.0), 5000, SeedLineage(3))
    r = np.linalg.norm(real.points, axis=1)
    # P(|X| <= t) = t^2 in the unit disk
    for t in (0.3, 0.6, 0.9):
        assert abs(np.mean(r <= t) - t * t) < 0.02


def test_resample_in_box_locality_and_law():
    base = sample_poisson(BOX, 1.5, SeedLineage(4))
    x = (1.0, -2.0)
    box = Region.box(x, 1.0)
    new = base.resample_in_box(x, SeedLineage(4, 1))
    outside_old = base.points[~box.contains(base.points)]
    outside_new = new.points[~box.contains(new.points)]
    assert np.array_equal(outside_old, outside_new)
    # counts inside the box follow Poisson(lam * 4): compare to fresh samples
    inside = [np.sum(box.contains(base.resample_in_box(x, SeedLineage(9, i)).points)) for i in range(5000)]
    ref = [len(sample_poisson(box, 1.5, SeedLineage(10, i))) for i in range(5000)]
    se = math.sqrt(2 * 6.0 / 5000)
    assert abs(np.mean(inside) - np.mean(ref)) < 4 * se
    assert abs(np.var(inside) / np.var(ref) - 1) < 0.15


def test_resample_empty_box_with_empty_draw_is_identity():
    real = Realization(np.array([[4.0, 4.0]]), BOX, 1e-12)
    new = real.resample_in_box((0, 0), SeedLineage(1))
    assert np.array_equal(new.points, real.points)
    with pytest.raises(ValueError):
        real.resample_in_box((4.5, 0), SeedLineage(1))


def test_add_point():
    empty = Realization(np.zeros((0, 2)), BOX, 1.0)
    one = empty.add_point((0.5, 0.5))
    assert len(one) == 1
    assert 0 in one.neighbors_within((0.5, 0.5), 0.1)
    with pytest.warns(UserWarning):
        two = one.add_point((0.5, 0.5))
    assert two.duplicate_warning and len(two) == 2
    with pytest.raises(ValueError):
        one.add_point((9, 9))


def test_neighbors_within_examples():
    real = Realization(np.array([[0, 0], [0.9, 0], [2, 0.0]]), BOX, 1.0)
    assert real.neighbors_within((0, 0), 0).tolist() == [0]
    assert real.neighbors_within((0, 0), 1).tolist() == [0, 1]


def test_grid_index_matches_linear_scan(rng):
    pts = rng.uniform(-5, 5, (1000, 2))
    g = GridIndex(pts)
    for _ in range(100):
        x = rng.uniform(-6, 6, 2)
        rad = rng.uniform(0, 2)
        ref = np.flatnonzero(np.linalg.norm(pts - x, axis=1) <= rad + 1e-9)
        assert g.within(x, rad).tolist() == ref.tolist()
    pairs = g.pairs_within(0.3)
    d = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    i, j = np.nonzero(np.triu(d <= 0.3 + 1e-9, 1))
    assert set(map(tuple, pairs.tolist())) == set(zip(i.tolist(), j.tolist()))


def test_grid_cells_hold_exactly_their_points(rng):
    pts = rng.uniform(-3, 3, (300, 3))
    g = GridIndex(pts)
    seen = np.concatenate(list(g.cells.values()))
    assert sorted(seen.tolist()) == list(range(300))
    for key, ids in g.cells.items():
        assert np.all(np.floor(pts[ids]).astype(int) == np.array(key))


def test_superpose_contains_original():
    a = sample_poisson(BOX, 1.0, SeedLineage(6))
    b = a.superpose(0.5, SeedLineage(6))
    assert np.array_equal(b.points[: len(a)], a.points)
    assert b.intensity == 1.5


def test_text_roundtrip_and_origin():
    a = sample_poisson(BOX, 0.5, SeedLineage(7))
    back = Realization.points_from_text(a.to_text())
    assert np.allclose(back, a.points, atol=1e-12)
    o = with_origin(a)
    assert np.array_equal(o.points[-1], [0, 0]) and o.meta["origin_index"] == len(a)


def test_marks_must_align():
    a = sample_poisson(BOX, 0.5, SeedLineage(8))
    MarkedRealization(a, np.ones(len(a), bool), np.zeros(len(a), bool))
    with pytest.raises(ValueError):
        MarkedRealization(a, np.ones(len(a) + 1, bool), np.zeros(len(a), bool))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.integers(0, 1000))
def test_seed_lineage_determinism(root, rep):
    reg = Region.centered_box(2, 2.0)
    a = sample_poisson(reg, 1.0, SeedLineage(root, rep))
    b = sample_poisson(reg, 1.0, SeedLineage(root, rep))
    assert np.array_equal(a.points, b.points)


def test_streams_are_distinct():
    lin = SeedLineage(1, 2)
    draws = {s: lin.rng(s).uniform() for s in ("base", "xi1", "xi2", "xi2_alt", "pivot", "resample")}
    assert len(set(draws.values())) == len(draws)
