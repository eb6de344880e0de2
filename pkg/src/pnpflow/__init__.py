"""Structure-preserving finite difference solver for two-species
drift-diffusion systems coupled to an electrostatic potential.

The scheme advances ion densities with a linearized Crank-Nicolson step
(Adams-Bashforth extrapolated drift), corrects each step by an L2 or H1
projection enforcing nonnegativity and exact mass conservation, and
recomputes the potential from a spectral Poisson solve.
"""

from .diagnostics import (
    DiagnosticsRecord,
    ErrorReport,
    convergence_rates,
    energies,
    error_vs_exact,
)
from .grid import (
    BoundaryType,
    Field,
    Grid,
    VectorField,
    average,
    diff_backward,
    diff_forward,
    div_avg_grad,
    divergence_plus,
    gradient_minus,
    inner,
    integral,
    laplacian,
    load_field,
    mean,
    norm_h1,
    norm_l2,
    norm_linf,
    norm_lp,
    save_field,
    seminorm_h1,
    shift_to_zero_mean,
)
from .poisson import PoissonSolver
from .projection import (
    H1Projection,
    L2Projection,
    ProjectionError,
    ProjectionResult,
    kkt_residual,
    project_h1,
    project_l2,
    project_l2_oracle,
)
from .stepper import (
    SchemeConfig,
    SimulationState,
    cn_ab_step,
    first_step,
    initialize,
    run,
    update_potential,
)

__version__ = "0.1.0"
