# %% [markdown]
# # Unit-length drift against the solver tolerance
#
# Newton only keeps |m| = 1 up to its stopping tolerance eps, so after a long
# relaxation the nodal deviation from unit length scales roughly like eps.
# The fixed-point solver is exact on the sphere regardless of eps.
# A short horizon keeps this demo fast; the acceptance suite uses T = 5.

# %%
import numpy as np

from midpoint_llg.sweeps import eps_sweep

eps_values = 10.0 ** -np.arange(1, 9)
res = eps_sweep([1 / 4], [0.006], eps_list=eps_values, T=0.5)
for p in res.points:
    print(f"{p.mode:10s} eps={p.eps:.0e}  max|m|-1 = {p.max_dev:.2e}  1-min|m| = {p.min_dev:.2e}")
for key, fit in res.fits.items():
    print(f"{key}: log-log slope {fit.slope:.3f}")
