# %% [markdown]
# # Clusters of Rips simplices
#
# Sample a Poisson cloud in a disc, list its Rips edges and triangles, and
# compare face clusters against the coarser star clusters.

# %%
import numpy as np

from faceperc import (Region, SeedLineage, crossing_face, crossing_star, enumerate_d_simplices,
                      sample_poisson)
from faceperc.rips import face_cluster_labels, star_cluster_labels

real = sample_poisson(Region.centered_ball(2, 9.5), 1.6, SeedLineage(1))
print(f"{len(real)} points")

# %%
for d in (1, 2):
    table = enumerate_d_simplices(real.points, d)
    nf = len(np.unique(face_cluster_labels(table)))
    ns = len(np.unique(star_cluster_labels(table, 2.5)))
    print(f"d={d}: {len(table)} simplices, {nf} face clusters, {ns} star clusters (r0=2.5)")

# %% [markdown]
# Star adjacency only merges clusters, so a face crossing always implies a
# star crossing.

# %%
for n in (3, 4, 5, 6):
    print(n, [crossing_face(real, d, n) for d in (1, 2)], [crossing_star(real, d, n, 2.5) for d in (1, 2)])
