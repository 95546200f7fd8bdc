# %% [markdown]
# # Below the transition, the rooted cluster dies fast
#
# Locate the edge crossing transition at n = 10 with coupled thresholds, then
# estimate the probability that the origin's edge cluster reaches distance r
# at 70% of that intensity.  The log curve should be close to linear.

# %%
from faceperc import ThetaSpec, bracket_transition, decay_fit, theta_curve

br = bracket_transition(2, 1, 10, 0.5, 3.0, replicas=200, seed=3)
print(f"crossing probability 1/2 near lambda = {br.lam_c:.3f}")
for lam in (0.8, 1.0, br.lam_c, 1.5):
    print(f"  P(cross) at {lam:.3f}: {br.crossing_probability(lam):.3f}")

# %%
lam = 0.7 * br.lam_c
curve = theta_curve(ThetaSpec(2, 1, tuple(range(2, 11)), lam, 5000, seed=4))
for r, rec in curve.items():
    lo, hi = rec.ci
    print(f"r={r:>2}  theta={rec.estimate:.4f}  [{lo:.4f}, {hi:.4f}]")

fit = decay_fit([(r, rec.estimate) for r, rec in curve.items()])
print(f"log-linear slope {fit.slope:.3f}, R^2 {fit.r2:.3f}")
