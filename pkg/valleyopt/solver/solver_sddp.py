import logging
import time
from typing import List, NamedTuple, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator
from tqdm import tqdm

from valleyopt.config import BOX_TOLERANCE, CUT_CAPACITY, KNOTS, WORKERS
from valleyopt.model.dynamics import control_combinations
from valleyopt.model.sampling import sample_atom_indices, spawn_seeds
from valleyopt.solver.one_step import (Continuation, Noise, expected_one_step_values, final_continuation,
                                       one_step_argmin, resolve_noise)
from valleyopt.solver.solver import Solver, SolverResult
from valleyopt.utils.data_models import Valley
from valleyopt.utils.parallel import parallel_starmap
from valleyopt.valuefn import CutPool, make_valley_knots

LOG_COLUMNS = ["iteration", "mean_forward_cost", "cuts", "max_pool_size", "estimate", "seconds"]


class SddpConfig(BaseModel):
    """ Settings of the discrete-control SDDP solver """
    model_config = ConfigDict(frozen=True)

    n_iterations: int = Field(default=25, ge=0)
    forward_batch: int = Field(default=8, ge=1)
    cut_capacity: int = Field(default=CUT_CAPACITY, ge=1)
    n_knots: int = Field(default=KNOTS, ge=2)
    fd_knots: Optional[List[List[float]]] = None
    prune: bool = False
    rng_seed: int = 0
    workers: int = Field(default=WORKERS, ge=1)
    progress: bool = False

    @model_validator(mode="after")
    def check_knots(self) -> "SddpConfig":
        if self.fd_knots is not None:
            bad = [d for d, k in enumerate(self.fd_knots) if len(k) < 2 or any(b <= a for a, b in zip(k, k[1:]))]
            if bad:
                raise ValueError(f"fd_knots of dimensions {bad} are not strictly increasing vectors of length >= 2")
        return self


class ForwardPass(NamedTuple):
    states: np.ndarray
    controls: np.ndarray
    cost: float


class SddpRun:
    """ Cut pools for stages 0..T-1 and the iteration log """

    def __init__(self, pools: List[CutPool], log: pd.DataFrame, seconds: float = 0.0):
        self.pools = pools
        self.log = log
        self.seconds = seconds

    def estimate(self, valley: Valley) -> Optional[float]:
        """ Stage-0 pool at the initial state. Finite-difference cuts are not valid minorants: not a bound. """
        if len(self.pools) == 0 or len(self.pools[0]) == 0:
            return None
        return float(self.pools[0](valley.x0))


def _continuation(valley: Valley, pools: Sequence[CutPool], t: int) -> Continuation:
    return pools[t + 1] if t + 1 < valley.horizon else final_continuation(valley)


def sddp_forward(valley: Valley, pools: Sequence[CutPool], scenario: Sequence[Noise],
                 combinations: Optional[np.ndarray] = None) -> ForwardPass:
    """
    Simulate a stock trajectory with the current cut approximations
    :param valley: The valley
    :param pools: Cut pools of stages 0..T-1, stage T uses the exact final cost
    :param scenario: One atom index (or ``(inflows, prices)`` pair) per stage
    :param combinations: Joint controls to enumerate, all of them by default
    :return: visited states (T+1, dams), controls (T, dams) and the realized cost
    """
    if len(scenario) != valley.horizon:
        raise ValueError(f"scenario of length {len(scenario)} for horizon {valley.horizon}")
    combinations = control_combinations(valley) if combinations is None else combinations
    states = np.empty((valley.horizon + 1, valley.n_dams))
    controls = np.empty((valley.horizon, valley.n_dams))
    states[0] = valley.x0
    cost = 0.0
    for t, w in enumerate(scenario):
        a, p = resolve_noise(valley, t, w)
        step = one_step_argmin(valley, states[t][None, :], a[None, :], p[None, :], _continuation(valley, pools, t),
                               combinations)
        controls[t] = step.controls[0]
        states[t + 1] = step.transition.x_next[0]
        cost += float(step.stage_cost[0])
    cost += float(final_continuation(valley)(states[-1][None, :])[0])
    return ForwardPass(states, controls, cost)


def fd_neighbors(knots: np.ndarray, x: np.ndarray, tolerance: float = BOX_TOLERANCE):
    """
    Finite-difference neighbors of states along one dimension: the adjacent knots for a state on a knot,
    the enclosing knots otherwise, and the state itself on the side where the box ends
    :param knots: Knot vector of the dimension
    :param x: Coordinates, shape (n,)
    :param tolerance: Distance under which a coordinate is considered on a knot
    :return: lower and upper neighbor coordinates
    """
    n = len(knots)
    x = np.clip(x, knots[0], knots[-1])
    i = np.minimum(np.searchsorted(knots, x), n - 1)
    on_prev = (i > 0) & (np.abs(x - knots[np.maximum(i - 1, 0)]) <= tolerance)
    k = np.where(on_prev, i - 1, i)
    on = on_prev | (np.abs(knots[i] - x) <= tolerance)
    lower = np.where(on, np.where(k > 0, knots[np.maximum(k - 1, 0)], x), knots[np.maximum(i - 1, 0)])
    upper = np.where(on, np.where(k < n - 1, knots[np.minimum(k + 1, n - 1)], x), knots[i])
    return lower, upper


def sddp_backward(valley: Valley, pools: List[CutPool], trajectories: Sequence[ForwardPass],
                  fd_knots: Sequence[np.ndarray], combinations: Optional[np.ndarray] = None,
                  prune: bool = False) -> List[CutPool]:
    """
    Add one finite-difference cut per visited state, stages T-1 down to 0
    :param valley: The valley
    :param pools: Cut pools of stages 0..T-1, updated in place
    :param trajectories: Forward passes, processed in order
    :param fd_knots: Knot vector per dam defining the finite-difference neighbors
    :param combinations: Joint controls to enumerate, all of them by default
    :param prune: Apply level-1 dominance pruning after each stage update
    :return: the updated pools
    """
    combinations = control_combinations(valley) if combinations is None else combinations
    d = valley.n_dams
    for t in range(valley.horizon - 1, -1, -1):
        states = np.array([trajectory.states[t] for trajectory in trajectories])
        n = len(states)
        points = [states]
        steps = []
        for j in range(d):
            lower, upper = fd_neighbors(np.asarray(fd_knots[j], dtype=float), states[:, j])
            below, above = states.copy(), states.copy()
            below[:, j], above[:, j] = lower, upper
            points += [below, above]
            steps.append(upper - lower)
        values = expected_one_step_values(valley, np.concatenate(points), valley.noise.stages[t],
                                          _continuation(valley, pools, t), combinations)
        value = values[:n]
        gradients = np.empty((n, d))
        for j in range(d):
            below = values[(1 + 2 * j) * n:(2 + 2 * j) * n]
            above = values[(2 + 2 * j) * n:(3 + 2 * j) * n]
            gradients[:, j] = (above - below) / steps[j]
        for b in range(n):
            pools[t].add_cut(value[b] - gradients[b] @ states[b], gradients[b], point=states[b])
        if prune:
            pools[t].prune_dominated()
    return pools


def solve_sddp(valley: Valley, config: Optional[SddpConfig] = None) -> SddpRun:
    """
    Alternate parallel forward simulations and a backward cut generation for a fixed number of iterations
    :param valley: The valley
    :param config: Solver settings
    :return: the cut pools and the iteration log
    """
    config = config or SddpConfig()
    start = time.perf_counter()
    pools = [CutPool(valley.n_dams, capacity=config.cut_capacity, stage=t, lower=valley.x_min,
                     upper=valley.x_max) for t in range(valley.horizon)]
    fd_knots = config.fd_knots or make_valley_knots(valley, config.n_knots)
    combinations = control_combinations(valley)
    seeds = spawn_seeds(config.rng_seed, config.n_iterations)
    rows = []
    run = SddpRun(pools, pd.DataFrame(columns=LOG_COLUMNS))
    for k in tqdm(range(config.n_iterations), desc="sddp iterations", disable=not config.progress):
        iteration_start = time.perf_counter()
        scenarios = sample_atom_indices(valley.noise, config.forward_batch, seeds[k])
        passes = parallel_starmap(sddp_forward, [(valley, pools, scenario, combinations) for scenario in scenarios],
                                  workers=config.workers)
        sddp_backward(valley, pools, passes, fd_knots, combinations, prune=config.prune)
        mean_cost = float(np.mean([forward.cost for forward in passes]))
        estimate = run.estimate(valley)
        seconds = time.perf_counter() - iteration_start
        sizes = [len(pool) for pool in pools]
        logging.info(f"sddp iteration {k}: mean forward cost {mean_cost:.6g}, estimate {estimate}, "
                     f"{sum(sizes)} cuts, {seconds:.3f}s")
        rows.append({"iteration": k, "mean_forward_cost": mean_cost, "cuts": sum(sizes),
                     "max_pool_size": max(sizes), "estimate": estimate, "seconds": seconds})
    run.log = pd.DataFrame(rows, columns=LOG_COLUMNS)
    run.seconds = time.perf_counter() - start
    return run


class SddpSolver(Solver):
    method = "sddpd"

    def __init__(self, config: Optional[SddpConfig] = None, workers: Optional[int] = None, progress: bool = False):
        config = config or SddpConfig()
        super().__init__(workers=config.workers if workers is None else workers, progress=progress or config.progress)
        self.config = config.model_copy(update={"workers": self.workers, "progress": self.progress})

    def solve(self, valley: Valley) -> SolverResult:
        run = solve_sddp(valley, self.config)
        return SolverResult(self.method, run.pools, valley.horizon, valley.n_dams, estimate=run.estimate(valley),
                            seconds=run.seconds, log=run.log)
