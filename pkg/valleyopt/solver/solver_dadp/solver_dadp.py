import logging
import time
import warnings
from typing import List, NamedTuple, Optional

import numpy as np
import pandas as pd
from tqdm import tqdm

from valleyopt.solver.solver import Solver, SolverResult
from valleyopt.solver.solver_dadp.dual_gradient import DualGradient, dual_gradient, link_names
from valleyopt.solver.solver_dadp.dual_state import DadpConfig, DualState, resolve_z_levels
from valleyopt.solver.solver_dadp.lbfgs import LbfgsMemory, armijo_search
from valleyopt.solver.solver_dadp.subproblem import SubproblemSolution, solve_subproblem
from valleyopt.utils.data_models import Valley
from valleyopt.utils.exceptions import ConvergenceWarning
from valleyopt.utils.parallel import parallel_starmap
from valleyopt.valuefn import make_knots

LOG_COLUMNS = ["iteration", "dual_value", "dual_payoff", "gradient_norm", "update", "seconds"]


class Evaluation(NamedTuple):
    multipliers: np.ndarray
    solutions: List[SubproblemSolution]
    gradient: DualGradient


class DadpResult:
    """ Final multipliers, per-dam subproblem solutions and the optimization history """

    def __init__(self, state: DualState, solutions: List[SubproblemSolution], converged: bool, status: str,
                 log: pd.DataFrame, multipliers: pd.DataFrame, seconds: float):
        self.state = state
        self.solutions = solutions
        self.converged = converged
        self.status = status
        self.log = log
        self.multipliers = multipliers
        self.seconds = seconds

    @property
    def dual_value(self) -> float:
        """ Relaxed optimal cost: a lower bound of the optimal cost """
        return self.state.dual_value

    @property
    def value_functions(self):
        """ Local Bellman functions, one list over t = 0..T per dam """
        return [solution.value_functions for solution in self.solutions]


def _dam_knots(valley: Valley, config: DadpConfig) -> List[np.ndarray]:
    if config.knots is not None:
        if len(config.knots) != valley.n_dams:
            raise ValueError(f"{len(config.knots)} knot vectors for {valley.n_dams} dams")
        return [np.asarray(k, dtype=float) for k in config.knots]
    return [make_knots(dam.x_min, dam.x_max, config.n_knots) for dam in valley.dams]


def _solve_dams(valley: Valley, multipliers: np.ndarray, z_levels, knots, smoothing: float,
                workers: int) -> List[SubproblemSolution]:
    return parallel_starmap(solve_subproblem, [(valley, i, multipliers, z_levels, knots[i], smoothing)
                                               for i in range(valley.n_dams)], workers=workers)


def _evaluate(valley: Valley, multipliers: np.ndarray, config: DadpConfig, z_levels, knots,
              smoothing: float) -> Evaluation:
    solutions = _solve_dams(valley, multipliers, z_levels, knots, smoothing, config.workers)
    gradient = dual_gradient(valley, solutions, n_samples=config.gradient_samples, exact=config.exact,
                             rng_seed=config.rng_seed, workers=config.workers)
    return Evaluation(multipliers, solutions, gradient)


def _gradient_norm(evaluation: Evaluation) -> float:
    return float(np.max(np.abs(evaluation.gradient.gradient), initial=0.0))


def _residual(evaluation: Evaluation, confidence: float) -> float:
    """ Largest deviation left once sampling noise is allowed for, zero for exact gradients """
    gradient = evaluation.gradient
    return float(np.max(np.abs(gradient.gradient) - confidence * gradient.std_error, initial=0.0))


def solve_dadp(valley: Valley, config: Optional[DadpConfig] = None) -> DadpResult:
    """
    Price decomposition with deterministic expected multipliers: solve every dam subproblem, estimate the
    expected coupling deviation, move the multipliers uphill on the dual function, until the deviation is
    below tolerance or the iteration budget is spent.
    The ascent runs on the smoothed dual (see :func:`solve_subproblem`), whose gradient vanishes at its maximum
    even where the exact dual has a kink. The returned value functions and dual value are those of the exact
    subproblems at the final multipliers.
    :param valley: The valley
    :param config: Solver settings
    :return: the multipliers, subproblem solutions, dual value and history
    """
    config = config or DadpConfig()
    start = time.perf_counter()
    knots = _dam_knots(valley, config)
    z_levels = resolve_z_levels(valley, config, knots)
    tolerance = config.tolerance_for(valley)
    smoothing = config.smoothing_for(valley)
    steps = config.steps_for(valley)
    shape = (valley.horizon, len(valley.topology.links))

    def evaluate(multipliers: np.ndarray) -> Evaluation:
        return _evaluate(valley, multipliers, config, z_levels, knots, smoothing)

    def objective(flat: np.ndarray):
        evaluation = evaluate(flat.reshape(shape))
        return -evaluation.gradient.dual_value, -evaluation.gradient.gradient.ravel(), evaluation

    def search(current: Evaluation, direction: np.ndarray):
        return armijo_search(objective, current.multipliers.ravel(), -current.gradient.dual_value,
                             -current.gradient.gradient.ravel(), direction, max_trials=config.max_line_search)

    logging.info(f"dadp on {valley.name or 'valley'}: {len(valley.topology.links)} links, smoothing {smoothing:.3g}, "
                 f"z levels per link {[len(levels) for levels in z_levels.values()]}")
    current = evaluate(np.zeros(shape))
    best = current
    memory = LbfgsMemory(config.memory)
    rows, history = [], []
    converged, status, update, failures = False, "max-iterations", "initial", 0
    progress = tqdm(total=config.max_iterations, desc="dadp iterations", disable=not config.progress)
    k = 0
    while True:
        norm = _gradient_norm(current)
        dual_value = current.gradient.dual_value
        seconds = time.perf_counter() - start
        logging.info(f"dadp iteration {k} ({update}): dual value {dual_value:.6g}, gradient norm {norm:.3g}, "
                     f"{seconds:.3f}s")
        rows.append({"iteration": k, "dual_value": dual_value, "dual_payoff": -dual_value, "gradient_norm": norm,
                     "update": update, "seconds": seconds})
        history.append(current.multipliers.ravel().copy())
        if dual_value > best.gradient.dual_value:
            best = current
        if _residual(current, config.confidence) <= tolerance:
            converged, status = True, "gradient-tolerance"
            break
        if k >= config.max_iterations:
            break
        ascent = current.gradient.gradient
        result = None
        if config.optimizer == "lbfgs":
            g = -ascent.ravel()
            steepest = -g * (config.initial_step / norm)
            direction = memory.direction(g) if len(memory) else None
            if direction is not None and float(g @ direction) < 0:
                result, update = search(current, direction), "quasi-newton"
            if result is None:
                memory.reset()
                result, update = search(current, steepest), "steepest"
            if result is not None:
                memory.update(result.point - current.multipliers.ravel(), result.gradient - g)
                current = result.payload
        if result is None:
            if config.optimizer == "lbfgs":
                failures += 1
                logging.warning(f"dadp iteration {k}: line search failed, taking a fixed step")
            update = "fixed"
            current = evaluate(current.multipliers + steps[:, None] / max(1, failures) * ascent)
        k += 1
        progress.update(1)
    progress.close()

    if not converged:
        message = (f"dadp stopped ({status}) after {k} iterations with gradient norm {_gradient_norm(current):.3g} "
                   f"> tolerance {tolerance:.3g}, returning the best iterate")
        logging.warning(message)
        warnings.warn(message, ConvergenceWarning)
        current = best
    solutions = current.solutions
    if smoothing > 0:
        solutions = _solve_dams(valley, current.multipliers, z_levels, knots, 0.0, config.workers)
    dual_value = float(sum(solution.value for solution in solutions))
    logging.info(f"dadp {status}: dual value {dual_value:.6g} at iteration {k}")
    state = DualState(multipliers=current.multipliers, gradient=current.gradient.gradient, dual_value=dual_value,
                      iteration=k, links=valley.topology.links)
    columns = [f"t{t}:{name}" for t in range(valley.horizon) for name in link_names(valley)]
    multipliers = pd.DataFrame(np.vstack(history), columns=columns)
    multipliers.insert(0, "iteration", range(len(history)))
    return DadpResult(state, solutions, converged, status, pd.DataFrame(rows, columns=LOG_COLUMNS),
                      multipliers, time.perf_counter() - start)


class DadpSolver(Solver):
    method = "dadp"

    def __init__(self, config: Optional[DadpConfig] = None, workers: Optional[int] = None, progress: bool = False):
        config = config or DadpConfig()
        super().__init__(workers=config.workers if workers is None else workers, progress=progress or config.progress)
        self.config = config.model_copy(update={"workers": self.workers, "progress": self.progress})

    def solve(self, valley: Valley) -> SolverResult:
        result = solve_dadp(valley, self.config)
        return SolverResult(self.method, result.value_functions, valley.horizon, valley.n_dams,
                            bound=result.dual_value, seconds=result.seconds, log=result.log,
                            converged=result.converged, status=result.status,
                            tables={"multipliers": result.multipliers})
