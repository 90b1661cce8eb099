"""Finite-horizon linear regulator with a convex barrier state constraint.

The barrier penalty is represented as a supremum of quadratics indexed by a
scalar penalty level; truncating that level turns the constrained regulator
into an unconstrained two-player linear-quadratic game whose feedback laws
come from differential Riccati final-value problems.  A shooting method over
the terminal state solves the coupled boundary value problem and returns the
optimal control together with the adversarial penalty schedule.
"""

from .barrier import (
    BarrierSpec,
    DualBarrier,
    PhiKind,
    Theta,
    barrier_value,
    barrier_value_M,
    conjugate,
    gamma_rho,
    gamma_rho_derivatives,
    lambda_plus,
    log_barrier_a_inv_lambertw,
    make_custom_barrier,
    make_log_barrier,
    maximizer_alpha_M,
    maximizer_alpha_exact,
    maximizer_beta_M,
)
from .errors import (
    BarrierLqrError,
    ConfigError,
    DomainError,
    IntegrationDivergedError,
    InvalidParameterError,
    ShapeError,
)
from .figures import emit_barrier_figure
from .lti import (
    ControlSignal,
    Grid,
    Plant,
    Problem,
    Trajectory,
    cost_exact,
    cost_lqr,
    cost_truncated,
    default_grid,
    game_cost,
    simulate,
    terminal_cost,
    violation_measure,
)
from .riccati import (
    AugmentedData,
    RiccatiSolution,
    augment,
    auxiliary_value,
    closed_loop_rollout,
    feedback_control,
    solve_fvp_augmented,
    solve_fvp_components,
)
from .shooting import (
    ShootingConfig,
    ShootingResult,
    backward_sweep,
    solve_tpbvp,
    unconstrained_reference,
)
from .verify import (
    DualityGridSpec,
    MSweepReport,
    TranscriptionSpec,
    direct_value_oracle,
    duality_audit,
    m_sweep,
    saddle_audit,
)

__version__ = "0.1.0"
