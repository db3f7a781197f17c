from valleyopt.solver.solver import Solver, SolverResult  # noqa: F401
from valleyopt.solver.one_step import Decision, one_step_argmin  # noqa: F401
from valleyopt.solver.solver_dp import DpConfig, DpSolver, dp_feedback, run_dp, solve_dp  # noqa: F401
from valleyopt.solver.solver_sddp import (ForwardPass, SddpConfig, SddpRun, SddpSolver,  # noqa: F401
                                          sddp_backward, sddp_forward, solve_sddp)
from valleyopt.solver.solver_dadp import (DadpConfig, DadpResult, DadpSolver, DualState,  # noqa: F401
                                          dual_gradient, solve_dadp, solve_subproblem)

SOLVERS = {
    DpSolver.method: DpSolver,
    SddpSolver.method: SddpSolver,
    DadpSolver.method: DadpSolver,
}
