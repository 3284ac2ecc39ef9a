"""Stabilized primal-dual P1 finite elements for data assimilation in
convection-dominated transport on the unit square.

The library assembles the interior-penalty stabilized saddle-point system
for recovering a stationary convection-diffusion field from interior data
without boundary conditions, solves it directly, and evaluates regional and
weighted error norms. The experiment driver sweeps mesh size, diffusion,
and data noise, and writes CSV for the plotting frontend.
"""

from .mesh import Mesh, build_mesh, classify_boundary, write_mesh_dump
from .assembly import (
    Disk,
    Rectangle,
    RectangleUnion,
    ProblemConfig,
    ExactSolution,
    EmptyRegionError,
    product_sine,
    layer,
    linear,
    assemble_a,
    assemble_s_Omega,
    assemble_s_star,
    assemble_s_omega,
    assemble_mass,
    assemble_load,
    assemble_data_rhs,
    included_elements,
    data_penalty_coefficient,
)
from .saddle import (
    SaddleSystem,
    Solution,
    SingularSystemError,
    EstimationFailureError,
    build_system,
    solve,
    condition_number,
)
from .weights import (
    WeightSpec,
    WeightField,
    WeightConstructionError,
    build_weight,
    l2_error,
    h1_semi_error,
    triple_norm,
    stab_norm,
)
from .experiments import (
    ExperimentPlan,
    NoiseSpec,
    ExperimentRow,
    InsufficientDataError,
    CASES,
    run_case,
    inject_noise,
    fit_rate,
    emit_csv,
)

__version__ = "0.1.0"
