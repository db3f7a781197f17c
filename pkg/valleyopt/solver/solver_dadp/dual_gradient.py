from typing import Dict, List, NamedTuple, Sequence, Tuple

import numpy as np

from valleyopt.model.sampling import sample_atom_indices, spawn_seeds
from valleyopt.solver.solver_dadp.subproblem import SubproblemSolution
from valleyopt.utils.data_models import Valley
from valleyopt.utils.exceptions import SampleCountError
from valleyopt.utils.parallel import parallel_starmap


class DualGradient(NamedTuple):
    gradient: np.ndarray
    dual_value: float
    std_error: np.ndarray


def _simulate_dam(solution: SubproblemSolution, scenarios: np.ndarray, rng_seed: int) -> Tuple[np.ndarray,
                                                                                                np.ndarray]:
    """ Inflows chosen from each child and own outflow along scenarios, shapes (T, children, n) and (T, n) """
    n, horizon = scenarios.shape
    rng = np.random.default_rng(rng_seed)
    initial, actions, moves = rng.random(n), rng.random((horizon, n)), rng.random((horizon, n))
    lower, weight = solution.initial_lottery()
    k = np.where(initial < weight, lower + 1, lower)
    z = np.empty((horizon, len(solution.children), n))
    outflow = np.empty((horizon, n))
    for t in range(horizon):
        kernel, stage = solution.kernels[t], solution.marginals[t]
        row = k * len(stage.probabilities) + stage.atom_map[scenarios[:, t]]
        begin, end = kernel.start[row], kernel.start[row + 1]
        base, top = kernel.cumulative[begin], kernel.cumulative[end]
        entry = np.searchsorted(kernel.cumulative, base + actions[t] * (top - base), side="right") - 1
        entry = np.clip(entry, begin, end - 1)
        z[t] = kernel.z[entry].T
        outflow[t] = kernel.outflow[entry]
        k = np.where(moves[t] < kernel.upper_weight[entry], kernel.lower[entry] + 1, kernel.lower[entry])
    return z, outflow


def _expect_dam(solution: SubproblemSolution) -> Tuple[np.ndarray, np.ndarray]:
    """ Exact expectations of the same quantities, propagating the distribution of the volume on the knots """
    horizon, n = len(solution.kernels), len(solution.knots)
    lower, weight = solution.initial_lottery()
    mass = np.zeros(n)
    mass[lower] += 1.0 - weight
    mass[lower + 1] += weight
    z = np.zeros((horizon, len(solution.children)))
    outflow = np.zeros(horizon)
    for t in range(horizon):
        kernel, stage = solution.kernels[t], solution.marginals[t]
        rows = np.repeat(np.outer(mass, stage.probabilities).ravel(), np.diff(kernel.start))
        w = rows * kernel.weight
        z[t] = w @ kernel.z
        outflow[t] = w @ kernel.outflow
        mass = (np.bincount(kernel.lower, weights=w * (1.0 - kernel.upper_weight), minlength=n)
                + np.bincount(kernel.lower + 1, weights=w * kernel.upper_weight, minlength=n))
    return z, outflow


def _link_positions(valley: Valley) -> Dict[int, int]:
    return {link: k for k, link in enumerate(valley.topology.links)}


def dual_gradient(valley: Valley, solutions: Sequence[SubproblemSolution], n_samples: int = 1000,
                  exact: bool = False, rng_seed: int = 0, workers: int = 1) -> DualGradient:
    """
    Expected deviation ``E[z_c - g_c]`` of every flow coupling at every stage, with every subproblem driven by
    its own decision kernels, and the dual value ``sum_i V_0^i(x0^i)``. The volume moves on the knots, split
    between the two knots around the next volume with the interpolation weights of the value functions, so the
    exact expectation is the derivative of the dual value in the multipliers.
    :param valley: The valley
    :param solutions: One subproblem solution per dam, solved under the same multipliers
    :param n_samples: Number of Monte Carlo scenarios
    :param exact: Enumerate the noise instead of sampling
    :param rng_seed: Seed of the scenarios and of the decision draws, reused across calls
    :param workers: Number of processes, one task per dam
    :return: gradient and standard errors of shape (T, links), and the dual value
    """
    horizon, links = valley.horizon, valley.topology.links
    position = _link_positions(valley)
    dual_value = float(sum(solution.value for solution in solutions))
    gradient = np.zeros((horizon, len(links)))
    std_error = np.zeros((horizon, len(links)))
    if not links:
        return DualGradient(gradient, dual_value, std_error)

    if exact:
        results = parallel_starmap(_expect_dam, [(solution,) for solution in solutions], workers=workers)
        for solution, (z, outflow) in zip(solutions, results):
            for j, child in enumerate(solution.children):
                gradient[:, position[child]] += z[:, j]
            if solution.index in position:
                gradient[:, position[solution.index]] -= outflow
        return DualGradient(gradient, dual_value, std_error)

    if n_samples < 1:
        raise SampleCountError(f"dual gradient needs at least one scenario, got {n_samples}")
    scenarios = sample_atom_indices(valley.noise, n_samples, rng_seed)
    seeds = spawn_seeds(rng_seed, len(solutions))
    results = parallel_starmap(_simulate_dam, [(solution, scenarios, seed) for solution, seed in
                                               zip(solutions, seeds)], workers=workers)
    deviation = np.zeros((horizon, len(links), n_samples))
    for solution, (z, outflow) in zip(solutions, results):
        for j, child in enumerate(solution.children):
            deviation[:, position[child]] += z[:, j]
        if solution.index in position:
            deviation[:, position[solution.index]] -= outflow
    gradient = deviation.mean(axis=-1)
    if n_samples > 1:
        std_error = deviation.std(axis=-1, ddof=1) / np.sqrt(n_samples)
    return DualGradient(gradient, dual_value, std_error)


def link_names(valley: Valley) -> List[str]:
    """ ``upstream->downstream`` dam ids of every link """
    return [f"{valley.dams[c].id}->{valley.dams[valley.topology.parent[c]].id}" for c in valley.topology.links]
