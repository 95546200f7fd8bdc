# %% [markdown]
# # Auditing the OSSS inequality
#
# Run the box exploration on shared samples and compare the variance of the
# crossing event with the sum of revealment times influence over unit boxes.

# %%
from faceperc import InfluenceSpec, osss_check

spec = InfluenceSpec(None, r=4, s=2.0, lam=1.2, replicas=200, seed=6)
rep = osss_check(spec)
print(f"theta = {rep.theta:.3f}")
print(f"theta(1-theta) = {rep.lhs:.4f}  vs  sum delta*Inf = {rep.rhs:.4f}  (pooled SE {rep.se_pooled:.4f})")
print(f"holds: {rep.holds}; exploration decisions disagreeing with the global crossing: {rep.decision_mismatches}")

# %%
top = sorted(rep.sites, key=lambda s: -s.inf)[:5]
for s in top:
    print(f"x={s.x}: delta={s.delta:.3f} Inf={s.inf:.3f} Piv={s.piv:.3f}")
