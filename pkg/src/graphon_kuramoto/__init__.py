"""Multi-layer oscillator networks on graphons and their continuum limits."""
from .analysis import (
    DesignResult,
    SpectrumReport,
    SyncSolution,
    continuum_stability_check,
    controlled_b_min,
    controlled_order_parameter,
    convergence_error_delta,
    discrete_stability_check,
    instability_boundary,
    inverse_design,
    solve_order_parameter_general,
    solve_order_parameter_simple,
    sync_profile_discrete,
    two_graph_eigenvalue,
    weakest_instability,
)
from .continuum import (
    ContinuumSystem,
    MeshFunction,
    l2_distance,
    picard_step_bound,
    solve_continuum_collocation,
    solve_continuum_picard,
)
from .dynamics import (
    DiscreteSystem,
    Intrinsic,
    PhaseState,
    SystemLayer,
    Trajectory,
    discrete_l2_norm,
    initial_from_profile,
    integrate,
    rhs_averaged,
    rhs_discrete,
    uniform_random_state,
)
from .errors import (
    ConfigError,
    ConstructionError,
    DomainError,
    InfeasibleDesignError,
    IntegrationError,
    PicardError,
)
from .kernels import (
    CouplingFunction,
    Graphon,
    ScalarProfile,
    cell_average,
    evaluate_graphon,
    graphon_cell_average,
)
from .network import (
    DETERMINISTIC_DENSE,
    RANDOM_DENSE,
    RANDOM_SPARSE,
    GraphLayer,
    WeightMatrix,
    build_deterministic_dense,
    realize,
    sample_random_dense,
    sample_random_sparse,
)

__version__ = "0.1.0"

__all__ = [
    "DesignResult",
    "SpectrumReport",
    "SyncSolution",
    "continuum_stability_check",
    "controlled_b_min",
    "controlled_order_parameter",
    "convergence_error_delta",
    "discrete_stability_check",
    "instability_boundary",
    "inverse_design",
    "solve_order_parameter_general",
    "solve_order_parameter_simple",
    "sync_profile_discrete",
    "two_graph_eigenvalue",
    "weakest_instability",
    "ContinuumSystem",
    "MeshFunction",
    "l2_distance",
    "picard_step_bound",
    "solve_continuum_collocation",
    "solve_continuum_picard",
    "DiscreteSystem",
    "Intrinsic",
    "PhaseState",
    "SystemLayer",
    "Trajectory",
    "discrete_l2_norm",
    "initial_from_profile",
    "integrate",
    "rhs_averaged",
    "rhs_discrete",
    "uniform_random_state",
    "ConfigError",
    "ConstructionError",
    "DomainError",
    "InfeasibleDesignError",
    "IntegrationError",
    "PicardError",
    "CouplingFunction",
    "Graphon",
    "ScalarProfile",
    "cell_average",
    "evaluate_graphon",
    "graphon_cell_average",
    "DETERMINISTIC_DENSE",
    "RANDOM_DENSE",
    "RANDOM_SPARSE",
    "GraphLayer",
    "WeightMatrix",
    "build_deterministic_dense",
    "realize",
    "sample_random_dense",
    "sample_random_sparse",
    "__version__",
]
