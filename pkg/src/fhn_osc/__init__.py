"""Predictor-corrector orthogonal spline collocation solver for 2D
FitzHugh-Nagumo reaction-diffusion systems, with manufactured-solution
convergence tooling and an independent finite-difference reference solver."""

from .mesh import (
    Domain, Mesh, GaussRule, CollocationGrid,
    build_mesh, gauss_rule, build_collocation,
)
from .basis import (
    SplineSpace, BasisSet, AxisBasis,
    build_spline_space, orthonormalize, eval_basis,
    IllConditionedBasisError, OutOfDomainError,
)
from .forms import (
    FieldValues, FaceValues, field_from_callables,
    ip_scalar, ip_grad, norm_dot, norm_grad,
    boundary_form, jump_form, l2_project, integration_by_parts_residual,
)
from .model import (
    FhnParams, ProblemSpec, reaction_F, lipschitz_constant_CF, example_problem,
)
from .timegrid import TimeGrid, build_graded, build_uniform, choose_N_for_target
from .stepper import (
    SolverConfig, StepReport, State, Trajectory, AssembledOperators,
    stencil_predictor_dt, stencil_corrector_dt, extrapolate_F,
    assemble_operators, initialize, predictor_step, corrector_step, run,
    discretize, solve_problem,
    BlowUpError, SolverError, InitializationError,
)
from .analysis import (
    ErrorReport, OracleSolution, OracleError,
    error_linf_l2, convergence_order, oracle_solve, stability_functional,
)

__version__ = "0.1.0"
