# %% [markdown]
# # Energy, effective field and the DMI term
#
# The local bilinear form is sum_d (A_d(d_d psi - J_d psi), d_d phi - J_d phi).
# With A_d = lex^2 I and J_d built from the canonical basis this is exchange
# plus bulk Dzyaloshinskii-Moriya interaction, once a zeroth-order operator pi
# cancels the term the completed square adds.

# %%
import numpy as np

from midpoint_llg import fem
from midpoint_llg import model as mdl
from midpoint_llg.integrator import hedgehog_initial
from midpoint_llg.mesh import build_unit_cube_mesh

mesh = build_unit_cube_mesh(4)
m = hedgehog_initial(mesh)
for name, model in [("exchange", mdl.exchange_only()), ("exchange + DMI", mdl.exchange_dmi(1.0, 0.5))]:
    print(f"{name:15s} E(hedgehog) = {mdl.energy(model, mesh, m):.6f}")
# x/|x| is a gradient field, so its curl and hence the DMI energy vanish

# %% [markdown]
# The general form agrees with the curl pairing on random fields. The literal
# scaling of pi leaves a gap proportional to the L2 product.

# %%
rng = np.random.default_rng(1)
lex, ldm = 1.3, 0.7
psi, phi = rng.standard_normal((2, mesh.n_nodes, 3))
curl = -mdl.dmi_curl_form(mesh, lex, ldm, psi, phi)
for literal in (False, True):
    a = mdl.a_eval(mdl.exchange_dmi(lex, ldm, paper_literal_pi=literal), mesh, psi, phi)
    print(f"literal pi={literal}: a - curl = {a - curl:+.3e},  "
          f"(a - curl)/(psi,phi) = {(a - curl) / fem.l2_inner(mesh, psi, phi):+.6f}")
print("predicted literal gap factor:", (ldm**2 - ldm) / (2 * lex**2))

# %% [markdown]
# The energy is the potential of the bilinear form: a central difference of E
# along phi reproduces a(m, phi).

# %%
model = mdl.exchange_dmi(lex, ldm)
delta = 1e-5
fd = (mdl.energy(model, mesh, m + delta * phi) - mdl.energy(model, mesh, m - delta * phi)) / (2 * delta)
print(f"finite difference {fd:.10f}  vs  a(m, phi) {mdl.a_eval(model, mesh, m, phi):.10f}")
