import logging
import time
import warnings
from typing import Optional, Tuple

import numpy as np
from tqdm import tqdm

from valleyopt.config import ENUMERATION_BUDGET, WORKERS
from valleyopt.evaluation.global_value import GlobalValue
from valleyopt.evaluation.policy import check_transition, policy_step
from valleyopt.model.dynamics import control_combinations, count_combinations, final_costs
from valleyopt.model.sampling import sample_atom_indices
from valleyopt.utils.data_models import SimReport, Valley
from valleyopt.utils.data_models.report import QUANTILE_LEVELS
from valleyopt.utils.exceptions import SampleCountError
from valleyopt.utils.parallel import chunked, parallel_starmap


def _simulate_chunk(valley: Valley, global_value: GlobalValue, indices: np.ndarray, budget: int,
                    progress: bool = False) -> Tuple[np.ndarray, np.ndarray, int, int]:
    m = len(indices)
    levels = [dam.control_levels for dam in valley.dams]
    combinations = control_combinations(valley, budget) if count_combinations(levels) <= budget else None
    states = np.empty((m, valley.horizon + 1, valley.n_dams))
    states[:, 0] = valley.x0
    cost = np.zeros(m)
    violations, fallback_steps = 0, 0
    for t in tqdm(range(valley.horizon), desc="simulation stages", disable=not progress):
        stage = valley.noise.stages[t]
        x, a, p = states[:, t], stage.inflows[indices[:, t]], stage.prices[indices[:, t]]
        step = policy_step(valley, global_value, t, x, a, p, combinations=combinations, budget=budget)
        violations += int(np.sum(check_transition(valley, x, a, step.controls, step.transition)))
        fallback_steps += m if step.fallback else 0
        cost += step.stage_cost
        states[:, t + 1] = step.transition.x_next
    cost += final_costs(valley, states[:, -1])
    return cost, states, violations, fallback_steps


def simulate(valley: Valley, global_value: GlobalValue, n_scenarios: int = 100000, rng_seed: int = 0,
             workers: Optional[int] = None, budget: int = ENUMERATION_BUDGET, method: str = "policy",
             optimization_seconds: Optional[float] = None, upper_bound_payoff: Optional[float] = None,
             progress: bool = False) -> SimReport:
    """
    Run the one-step policy along independent Monte Carlo scenarios
    :param valley: The valley
    :param global_value: Approximate cost-to-go used online
    :param n_scenarios: Number of scenarios
    :param rng_seed: Seed of the scenarios
    :param workers: Number of processes, scenarios are split in contiguous chunks
    :param budget: Largest joint enumeration per step, coordinate descent beyond it
    :param method: Label of the report
    :param optimization_seconds: Wall time of the optimization stage, copied to the report
    :param upper_bound_payoff: Dual bound in payoff convention, copied to the report
    :param progress: Show a progress bar
    :return: payoffs, their mean and standard error, volume quantiles and violation count
    """
    if n_scenarios < 1:
        raise SampleCountError(f"simulation needs at least one scenario, got {n_scenarios}")
    workers = WORKERS if workers is None else workers
    start = time.perf_counter()
    indices = sample_atom_indices(valley.noise, n_scenarios, rng_seed)
    chunks = list(chunked(indices, workers))
    parts = parallel_starmap(_simulate_chunk, [(valley, global_value, chunk, budget, progress and k == 0)
                                               for k, chunk in enumerate(chunks)], workers=workers)
    cost = np.concatenate([part[0] for part in parts])
    states = np.concatenate([part[1] for part in parts])
    violations = sum(part[2] for part in parts)
    fallback_steps = sum(part[3] for part in parts)

    payoffs = -cost
    mean = float(np.mean(payoffs))
    if n_scenarios > 1 and not np.all(payoffs == payoffs[0]):
        std_error = float(np.std(payoffs, ddof=1) / np.sqrt(n_scenarios))
    else:
        std_error = 0.0
    seconds = time.perf_counter() - start
    if violations:
        logging.warning(f"{method}: {violations} simulated transitions violate the valley constraints")
    if fallback_steps:
        message = f"{method}: coordinate descent replaced enumeration on {fallback_steps} scenario steps"
        logging.warning(message)
        warnings.warn(message)
    logging.info(f"{method}: mean payoff {mean:.6g} +/- {std_error:.3g} over {n_scenarios} scenarios "
                 f"in {seconds:.3f}s")
    return SimReport(method=method, n_scenarios=n_scenarios, payoffs=payoffs.tolist(), mean_payoff=mean,
                     std_error=std_error, quantiles=np.quantile(states, QUANTILE_LEVELS, axis=0).tolist(),
                     dam_ids=[dam.id for dam in valley.dams], violations=violations, fallback_steps=fallback_steps,
                     simulation_seconds=seconds, optimization_seconds=optimization_seconds,
                     upper_bound_payoff=upper_bound_payoff)
