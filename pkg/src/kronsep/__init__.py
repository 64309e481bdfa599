"""Matrix-free solvers for Kronecker-structured posterior mean systems in
diffuse-sky source separation."""
from .cg import CgConfig, solve_cg
from .dense import assemble_dense, solve_dense
from .errors import (
    ConfigurationError,
    MapFormatError,
    NumericalBreakdown,
    OutOfMemoryError,
    ShapeError,
    SingularPencilError,
    SizeGuardError,
)
from .grid import SkyGrid, apply_D, apply_D_squared, neighbors, new_grid
from .lanczos import (
    SylvesterProblem,
    residual_estimate,
    solve_projected,
    solve_sylvester,
    sylvester_problem,
    sylvester_problem_from_rhs,
    weighted_block_qr,
)
from .model import (
    ModelSpec,
    build_mixing_matrix,
    build_rhs,
    default_T,
    planck_conversion,
    planck_model,
)
from .operators import PosteriorOperator, apply_BtCB, apply_posterior, apply_Q, reshape, vectorize
from .report import SolveReport
from .simio import SimConfig, read_maps, simulate, write_maps
from .sparse_dense import solve_sparse_dense

__version__ = "0.1.0"
