"""Mixed C0 hp finite elements for the fourth-order two-parameter
singularly perturbed problem

    eps1^2 lap^2 u - eps2^2 lap u + c u = f,   u = du/dn = 0 on the boundary,

on smooth star-shaped 2D domains, discretized on boundary-layer-adapted
spectral meshes with energy- and balanced-norm error evaluation.
"""

from .analysis import (
    ErrorReport,
    ManufacturedCase,
    balanced_norm,
    coercivity_probe,
    disk_case,
    disk_config,
    energy_norm,
    error_against_exact,
    error_against_reference,
)
from .assembly import LinearSystem, ProblemConfig, assemble_system, element_matrices
from .errors import (
    ConfigError,
    GeometryError,
    MeshError,
    NumericalError,
    PointLocationError,
    SblfemError,
    SingularSystemError,
)
from .femspace import DofMap, Solution, build_dof_map, evaluate_field
from .geometry import (
    BoundaryCurve,
    Circle,
    Cranioid,
    ElementMap,
    ParametricCurve,
    SubIntervalMap,
    TransfiniteMap,
    transfinite_map,
)
from .harness import ProblemSpec, SweepRow, SweepSpec, load_config, make_reference, run_sweep
from .mesh import (
    AsymptoticMesh,
    SBLMesh,
    build_asymptotic_mesh,
    build_sbl_mesh,
    check_admissibility,
    export_mesh,
    mesh_area,
    sbl_breakpoints,
)
from .refspace import TensorBasis, gauss_rule, gll_interpolate, gll_nodes, tensor_basis
from .solver import equilibrate, solve_problem, sparse_lu_solve

__version__ = "0.1.0"
