# %% [markdown]
# # Special points and thinning
#
# A special point sits between two tight, well separated groups of d points
# and sees nothing else within r0.  Deleting it cannot change face clusters
# far away, so the second mark that decides its fate is invisible to face
# crossings.

# %%
import numpy as np

from faceperc import (Realization, Region, ThinSpec, detect_special, theta_face_thin, theta_star_thin)
from faceperc.enhancement import xi2_invariance

pts = np.array([[0.0, 0.0], [-0.7, 0.0], [0.7, 0.0], [6.0, 6.0]])
real = Realization(pts, Region.centered_ball(2, 12), 1.0)
for rep in detect_special(real, 2.5, 1):
    print(f"special point {rep.point}: groups {rep.group_y} {rep.group_z}, separation {rep.dist_yz:.2f}")

# %%
spec = ThinSpec(lam=1.2, p=0.9, q=0.5, n=4, replicas=200, seed=7)
print("face", theta_face_thin(spec))
print("star", theta_star_thin(spec))
print("paired xi2 streams", xi2_invariance(spec))
