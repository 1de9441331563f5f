"""Grover search with a priori probabilities: simulation, closed forms and optimization."""

__version__ = "0.1.0"

from .errors import (
    DegenerateModelError,
    DegeneratePriorError,
    DegenerateSubspaceError,
    InvalidDimensionError,
    InvalidGridError,
    InvalidInputError,
    InvalidTargetError,
    NonquadraticRegimeError,
    NumericalError,
    QsoptError,
    SingularSystemError,
    UndefinedAngleError,
)
from .states import (
    IterationGeometry,
    PriorDistribution,
    UnitRealVector,
    prior_from_weights,
    project_onto_plane,
    target_geometry,
    uniform_state,
)
from .grover import (
    GroverSchedule,
    apply_diffusion,
    apply_oracle,
    average_failure,
    average_success,
    j_of_lambda,
    lambda_of_j,
    run_iterations,
    simulated_average_success,
    standard_grover_prob,
    success_probability_analytic,
    success_probability_exact,
)
from .gradient import GradientBundle, StdBlocks, gradient_bundle, std_blocks, std_point
from .optimizer import (
    DifferentialSystem,
    OptimizationOutcome,
    build_system,
    curvature_S,
    first_order_directions,
    optimize,
)
from .twovalue import (
    TwoValueClosedForm,
    TwoValueSpec,
    delta_j,
    dlambda_third_order,
    exact_ratio_scan,
    first_order_direction_closed,
    higher_order_coeffs,
    minv_closed_form,
    optimize_two_value,
    s_factor,
    valid_range,
)
from .verify import (
    VerificationReport,
    constrained_ascent,
    empirical_curvature,
    finite_diff_gradients,
    minv_numeric_check,
)
