"""SVIRS epidemic dynamics with graph-Laplacian diffusion on weighted networks."""

from .equilibria import (
    EquilibriumReport,
    analyze,
    compute_dfe,
    compute_endemic,
    compute_r0_closed,
    compute_r0_spectral,
)
from .graph import (
    LaplacianOperator,
    WeightedGraph,
    apply_laplacian,
    build_laplacian,
    check_connected,
    green_identity_residual,
    load_matrix_market,
)
from .model import StateField, SvirsParams, rhs_full, rhs_reduced
from .scenario import Scenario, data_file, load_scenario
from .simulation import (
    IntegratorConfig,
    Trajectory,
    certify_descent,
    integrate,
    lyapunov_dfe,
    lyapunov_endemic,
)

__version__ = "0.1.0"
