from .classical import (
    ClassicalDensity,
    classical_density,
    classical_ergodicity_check,
    classical_momentum_branch,
    classical_phase_space_density,
    find_turning_points,
)
from .evolution import EvolutionSpec, evolution_operator, evolve
from .propagators import (
    band_limit_window,
    free_ccp_analytic,
    free_ccp_numeric,
    free_kernel,
    midpoint_ccp_analytic,
    midpoint_ccp_numeric,
    midpoint_completeness,
)
from .semiclassical import (
    CoarseGrainReport,
    GradientReport,
    branch_projection,
    coarse_grain_decay,
    free_gradient_check,
    gradient_check,
)

__all__ = [
    "ClassicalDensity",
    "CoarseGrainReport",
    "EvolutionSpec",
    "GradientReport",
    "band_limit_window",
    "branch_projection",
    "classical_density",
    "classical_ergodicity_check",
    "classical_momentum_branch",
    "classical_phase_space_density",
    "coarse_grain_decay",
    "evolution_operator",
    "evolve",
    "find_turning_points",
    "free_ccp_analytic",
    "free_ccp_numeric",
    "free_gradient_check",
    "free_kernel",
    "gradient_check",
    "midpoint_ccp_analytic",
    "midpoint_ccp_numeric",
    "midpoint_completeness",
]
