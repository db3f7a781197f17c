import logging
import time
from typing import List, NamedTuple, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator
from tqdm import tqdm

from valleyopt.config import DP_BUDGET, KNOTS, WORKERS
from valleyopt.model.dynamics import control_combinations, count_combinations, final_costs
from valleyopt.solver.one_step import (Decision, Noise, expected_one_step_values, optional_continuation,
                                       single_decision)
from valleyopt.solver.solver import Solver, SolverResult
from valleyopt.utils.data_models import StageNoise, Valley
from valleyopt.utils.exceptions import BudgetExceededError
from valleyopt.utils.parallel import chunked, parallel_starmap
from valleyopt.valuefn import GridValueFunction, grid_nodes, make_valley_knots


class DpConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_knots: int = Field(default=KNOTS, ge=2)
    knots: Optional[List[List[float]]] = None
    budget: int = Field(default=DP_BUDGET, ge=1)
    workers: int = Field(default=WORKERS, ge=1)
    progress: bool = False

    @model_validator(mode="after")
    def check_knots(self) -> "DpConfig":
        if self.knots is not None:
            bad = [d for d, k in enumerate(self.knots) if len(k) < 2 or any(b <= a for a, b in zip(k, k[1:]))]
            if bad:
                raise ValueError(f"knots of dimensions {bad} are not strictly increasing vectors of length >= 2")
        return self


class DpRun(NamedTuple):
    value_functions: List[GridValueFunction]
    log: pd.DataFrame


def _stage_values(valley: Valley, nodes: np.ndarray, stage: StageNoise, next_value: Optional[GridValueFunction],
                  combinations: np.ndarray) -> np.ndarray:
    # the last stage uses the final cost itself rather than its interpolation
    return expected_one_step_values(valley, nodes, stage, optional_continuation(next_value, valley), combinations)


def check_budget(valley: Valley, knots: Sequence[np.ndarray], budget: int):
    n_nodes = int(np.prod([len(k) for k in knots], dtype=float))
    n_combinations = count_combinations([dam.control_levels for dam in valley.dams])
    n_atoms = max(stage.n_atoms for stage in valley.noise.stages)
    size = float(n_nodes) * n_combinations * n_atoms
    if size > budget:
        raise BudgetExceededError(f"dynamic programming needs {n_nodes} grid nodes x {n_combinations} control "
                                  f"combinations x {n_atoms} atoms = {size:.3g} evaluations per stage, "
                                  f"budget is {budget}")


def run_dp(valley: Valley, grids: Optional[Sequence[Sequence[float]]] = None,
           config: Optional[DpConfig] = None) -> DpRun:
    """
    Solve the dynamic programming equation backwards on the product grid
    :param valley: The valley
    :param grids: Knot vector per dam, first and last knots on the state box bounds
    :param config: Solver settings, ``config.knots`` is used when ``grids`` is None
    :return: value functions for t = 0..T and the per-stage timing log
    """
    config = config or DpConfig()
    if grids is None:
        grids = config.knots
    knots = make_valley_knots(valley, config.n_knots) if grids is None else [np.asarray(k, dtype=float)
                                                                            for k in grids]
    check_budget(valley, knots, config.budget)
    nodes = grid_nodes(knots)
    shape = tuple(len(k) for k in knots)
    combinations = control_combinations(valley, budget=None)

    horizon = valley.horizon
    value_functions = [None] * (horizon + 1)
    value_functions[horizon] = GridValueFunction(knots, final_costs(valley, nodes).reshape(shape), stage=horizon)
    rows = []
    for t in tqdm(range(horizon - 1, -1, -1), desc="dp stages", disable=not config.progress):
        start = time.perf_counter()
        chunks = list(chunked(nodes, config.workers))
        next_value = value_functions[t + 1] if t + 1 < horizon else None
        parts = parallel_starmap(_stage_values, [(valley, chunk, valley.noise.stages[t], next_value,
                                                  combinations) for chunk in chunks], workers=config.workers)
        value_functions[t] = GridValueFunction(knots, np.concatenate(parts).reshape(shape), stage=t)
        seconds = time.perf_counter() - start
        logging.info(f"dp stage {t}: {len(nodes)} nodes x {len(combinations)} combinations in {seconds:.3f}s")
        rows.append({"stage": t, "nodes": len(nodes), "combinations": len(combinations), "seconds": seconds})
    return DpRun(value_functions, pd.DataFrame(rows, columns=["stage", "nodes", "combinations", "seconds"]))


def solve_dp(valley: Valley, grids: Optional[Sequence[Sequence[float]]] = None,
             config: Optional[DpConfig] = None) -> List[GridValueFunction]:
    """ Bellman functions V_0..V_T on the product grid, see :func:`run_dp` """
    return run_dp(valley, grids, config).value_functions


def dp_feedback(valley: Valley, value_functions: Sequence[GridValueFunction], t: int, x, w: Noise) -> Decision:
    """
    Optimal joint control at stage t once the noise is observed
    :param valley: The valley
    :param value_functions: Output of :func:`solve_dp`
    :param t: Stage, 0 <= t < T
    :param x: State vector
    :param w: Atom index of stage t, or an ``(inflows, prices)`` pair
    :return: the argmin control (first in lexicographic order on ties) with its cascaded transition
    """
    continuation = optional_continuation(value_functions[t + 1] if t + 1 < valley.horizon else None, valley)
    return single_decision(valley, x, w, t, continuation, control_combinations(valley))


class DpSolver(Solver):
    method = "dp"

    def __init__(self, config: Optional[DpConfig] = None, workers: Optional[int] = None, progress: bool = False):
        config = config or DpConfig()
        super().__init__(workers=config.workers if workers is None else workers, progress=progress or config.progress)
        self.config = config.model_copy(update={"workers": self.workers, "progress": self.progress})

    def solve(self, valley: Valley) -> SolverResult:
        start = time.perf_counter()
        run = run_dp(valley, config=self.config)
        seconds = time.perf_counter() - start
        estimate = float(run.value_functions[0](valley.x0))
        logging.info(f"dp: optimal cost {estimate:.6g} (payoff {-estimate:.6g}) in {seconds:.3f}s")
        return SolverResult(self.method, run.value_functions, valley.horizon, valley.n_dams, estimate=estimate,
                            seconds=seconds, log=run.log)
