from valleyopt.solver.solver_dadp.dual_state import DadpConfig, DualState, default_z_levels  # noqa: F401
from valleyopt.solver.solver_dadp.subproblem import SubproblemSolution, solve_subproblem  # noqa: F401
from valleyopt.solver.solver_dadp.dual_gradient import DualGradient, dual_gradient  # noqa: F401
from valleyopt.solver.solver_dadp.solver_dadp import DadpResult, DadpSolver, solve_dadp  # noqa: F401
