from typing import List, Tuple

import numpy as np

from valleyopt.utils.data_models import NoiseProcess


def spawn_seeds(rng_seed: int, n: int) -> List[int]:
    """ Independent child seeds derived from one seed """
    return [int(child.generate_state(1)[0]) for child in np.random.SeedSequence(rng_seed).spawn(n)]


def sample_atom_indices(noise: NoiseProcess, n_scenarios: int, rng_seed: int) -> np.ndarray:
    """ Draw atom indices stage by stage, independently across stages

    :param noise: The noise process
    :param n_scenarios: Number of scenarios
    :param rng_seed: Seed
    :return: integer array of shape (n_scenarios, horizon)
    """
    rng = np.random.default_rng(rng_seed)
    indices = np.empty((n_scenarios, noise.horizon), dtype=int)
    for t, stage in enumerate(noise.stages):
        cdf = np.cumsum(stage.probabilities)
        draws = rng.random(n_scenarios)
        indices[:, t] = np.minimum(np.searchsorted(cdf, draws, side="right"), stage.n_atoms - 1)
    return indices


def sample_scenario(noise: NoiseProcess, rng_seed: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """ Draw one scenario of (inflow vector, price vector) pairs, one per stage """
    indices = sample_atom_indices(noise, 1, rng_seed)[0]
    return [(stage.inflows[k], stage.prices[k]) for stage, k in zip(noise.stages, indices)]
