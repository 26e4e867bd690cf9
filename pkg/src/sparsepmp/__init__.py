"""
sparsepmp: indirect solver for sparse (L0-cost) optimal control problems
with equality/inequality constraints at intermediate time instants.

The necessary conditions (adjoint equations, transversality and
intermediate-point jump conditions, Hamiltonian maximization, constancy
and continuity) are assembled into a square shooting residual whose zero
is found by a hybrid stochastic-approximation / damped-Newton iteration.
"""

from .problem import (
    AdmissibleSet,
    BoundaryFunction,
    ControlSystem,
    FeasibilityReport,
    IntermediatePoints,
    IntermediateSpec,
    ObjectiveSpec,
    ProblemSpec,
    Process,
    SparsityWindows,
    augment_problem,
    check_feasible,
    sparse_state_rhs,
    validate_gradients,
)
from .pmp import (
    AdjointState,
    AffineBoxRule,
    CandidateRule,
    FiniteSetRule,
    GridRule,
    JumpRecord,
    Multipliers,
    adjoint_rhs,
    grid_argmax_oracle,
    hamiltonian,
    initial_costate,
    jump_residual_apply,
    synthesize_control,
    terminal_residual,
)
from .integrate import (
    IntegrationError,
    IntegrationGrid,
    TrajectoryRecord,
    integrate_extremal,
    refine_switch_times,
    simulate_process,
)
from .shooting import (
    ResidualVector,
    ShootingParams,
    eval_phi,
    jacobian_fd,
    pack,
    residual_to_zeta_layout,
    unpack,
    zeta_dims,
)
from .solver import (
    NoiseSource,
    SolveResult,
    SolverConfig,
    SolverTrace,
    StepSchedule,
    newton_step,
    sa_step,
    solve,
    solve_root,
)
from .timescale import (
    ScaledProcess,
    StitchedView,
    backward_map_G,
    cost_equivalence_check,
    forward_map_F,
)
from . import benchmarks, verify

__version__ = "0.1.0"
