"""Twin-experiment laboratory for interpolation-based continuous data
assimilation on dissipative PDEs."""

__version__ = "0.1.0"

from .analysis import ErrorSeries, RateFit, SweepTable, build_sweep, fit_rate
from .assimilation import (
    ConditionReport,
    TwinExperiment,
    TwinResult,
    check_condition,
    estimate_lipschitz,
    run_twin,
    run_twin_joint,
)
from .grids import Field, Grid1D, Grid2D
from .interpolation import (
    CubicSplinePeriodic,
    Interpolant,
    Linear,
    ObservationNetwork,
    RbfWendlandC2,
    build_interpolant,
    coercivity_diagnostic,
    equispaced_points_1d,
    estimate_interp_constant,
    evaluate_on_grid,
    halton_points_2d,
    interpolated_discrepancy,
    kappa_alignment,
    network_from_json,
    network_to_json,
    sample_at,
)
from .models import (
    Burgers,
    KppBurgers,
    KuramotoSivashinsky,
    NavierStokes2D,
    SchemeSpec,
    SplitRhs,
    aot_rhs,
    idda_rhs,
    initial_condition,
    reference_rhs,
)
from .operators import (
    diff_periodic,
    divergence_2d,
    gradient_2d,
    l2_inner,
    l2_norm,
    laplacian_2d,
    poisson_solve_2d,
    velocity_from_streamfunction,
)
from .rk45 import StiffnessError, Tolerances, Trajectory, integrate_rk45
