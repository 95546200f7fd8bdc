# %% [markdown]
# # Cycles from the Delaunay tessellation
#
# Grow the set K of non-vacant Delaunay triangles connected to the axis and
# read off its outer boundary.  Boundary components that close up away from
# the window rim are genuine edge cycles.

# %%
from faceperc import Region, SeedLineage, cycle_candidate, delaunay, grow_K, is_cycle, sample_poisson, vacancy_flags

for lam in (0.2, 0.6, 2.0):
    real = sample_poisson(Region.centered_box(2, 8), lam, SeedLineage(5))
    cx = delaunay(real)
    vac = vacancy_flags(cx, real)
    g = grow_K(cx, real)
    cands = cycle_candidate(cx, real, K=g.K)
    closed = [c for c in cands if c.is_cycle and not c.touches_rim]
    print(f"lambda={lam}: {len(cx)} triangles, {vac.mean():.2f} vacant, |K|={len(g.K)}, "
          f"axis escapes={g.axis_escapes}, closed cycles={len(closed)}")
    for c in closed:
        assert is_cycle(c.faces)
