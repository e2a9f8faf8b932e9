# %% [markdown]
# # Feasibility of the fixed-point solver: k ~ h^2
#
# The first time-step from the hedgehog state is solved for a geometric
# schedule of step sizes. Per mesh size the threshold is the geometric mean of
# the last feasible and the first infeasible k. The fitted slope of log k_thresh
# against log h should be close to 2.
#
# The same sweep is available from the command line:
# `midpoint-llg cfl-sweep run.cfg --output out`.

# %%
from midpoint_llg.sweeps import cfl_sweep

res = cfl_sweep([1 / 2, 1 / 4, 1 / 8], mode="fixedpoint", eps=1e-8)
for (mode, N), t in sorted(res.thresholds.items()):
    print(f"h=1/{N}: feasible up to {t.k_feasible:.5f}, fails at {t.k_infeasible:.5f}, k_thresh {t.k_thresh:.5f}")
fit = res.fits[("fixedpoint", "k_thresh")]
print(f"fitted exponent beta = {fit.slope:.3f}")

# %% [markdown]
# Newton is far less restricted on these meshes; at h = 1/4 it converges over
# the entire schedule.

# %%
newton = cfl_sweep([1 / 4], mode="newton", eps=1e-8)
t = newton.thresholds[("newton", 4)]
print("Newton, h=1/4: largest feasible k on the grid", t.k_feasible, "first failure", t.k_infeasible)
