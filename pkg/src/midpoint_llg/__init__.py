"""Mass-lumped P1 midpoint scheme for the Landau-Lifshitz-Gilbert equation.

Nodal fields are plain ``(n_nodes, 3)`` float arrays; dual vectors (pairing
coefficients against the hat functions) use the same layout.
"""

from .config import RunConfig, parse_config
from .fem import (
    h1_seminorm_sq,
    l2_inner,
    lumped_norm,
    lumped_weights,
    mass_lumped_inner,
    nodal_interpolate,
    riesz_lumped,
)
from .integrator import (
    SchemeMode,
    StepRecord,
    Trajectory,
    energy_identity_residual,
    hedgehog_initial,
    midpoint_step,
    run,
    unit_length_deviation,
)
from .mesh import Mesh, build_box_mesh, build_unit_cube_mesh, element_volume, mesh_stats
from .model import (
    MaterialModel,
    ScalingPi,
    UniaxialAnisotropy,
    ZeroPi,
    a_eval,
    aloc_apply,
    dmi_curl_form,
    energy,
    exchange_dmi,
    exchange_only,
    general_model,
    heffloc_field,
)
from .solvers import (
    NonConvergenceError,
    SolverReport,
    StepProblem,
    dense_oracle_solve,
    fixed_point_solve,
    gmres_solve,
    newton_solve,
)
from .sweeps import SweepResult, cfl_sweep, eps_sweep

__version__ = "0.1.0"
