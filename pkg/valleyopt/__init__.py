from valleyopt.utils.data_models import Dam, NoiseProcess, SimReport, Valley, ValleyTopology  # noqa: F401
from valleyopt.model import cascade, dam_step, load_valley, write_valley  # noqa: F401
from valleyopt.solver import (DadpSolver, DpSolver, SddpSolver, Solver, SolverResult, solve_dadp,  # noqa: F401
                              solve_dp, solve_sddp)
from valleyopt.evaluation import GlobalValue, compare, generate_valley, simulate  # noqa: F401

__version__ = '0.1.0'
