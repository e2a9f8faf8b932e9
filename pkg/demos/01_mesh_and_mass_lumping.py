# %% [markdown]
# # Mesh and mass lumping
#
# The cube [-1/2, 1/2]^3 is cut into N^3 subcubes, each split into six
# tetrahedra around the main diagonal. Piecewise linear fields live on the
# nodes, and the lumped inner product replaces the exact L2 product by a
# nodal quadrature with weights beta_z.

# %%
import math

import numpy as np

from midpoint_llg import fem
from midpoint_llg.mesh import build_unit_cube_mesh, mesh_stats

for N in (1, 2, 4, 8):
    mesh = build_unit_cube_mesh(N)
    stats = mesh_stats(mesh)
    print(f"N={N}: {mesh.n_nodes} nodes, {mesh.n_tets} tets, total volume {mesh.volumes.sum():.15f}, "
          f"h_max={stats['h_max']:.4f}")

# %% [markdown]
# Lumped weights sum to the volume. The lumped norm is never smaller than the
# L2 norm and at most sqrt(5) times larger.

# %%
rng = np.random.default_rng(0)
mesh = build_unit_cube_mesh(4)
beta = fem.lumped_weights(mesh)
print("sum of weights:", beta.sum())
ratios = []
for _ in range(200):
    phi = rng.standard_normal((mesh.n_nodes, 3))
    ratios.append(fem.lumped_norm(beta, phi) / fem.l2_norm(mesh, phi))
print(f"||phi||_h / ||phi||_L2 in [{min(ratios):.4f}, {max(ratios):.4f}], sqrt(5) = {math.sqrt(5):.4f}")

# %% [markdown]
# The lumped Riesz map turns a dual vector into a nodal field: divide by beta.

# %%
d = fem.l2_action(mesh, np.ones((mesh.n_nodes, 3)))
print("Riesz image of (1, .)_L2 is the constant field:", np.allclose(fem.riesz_lumped(beta, d), 1.0))
