import itertools
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from valleyopt.config import ENUMERATION_BUDGET
from valleyopt.utils.data_models import Dam, StageTransition, Valley
from valleyopt.utils.exceptions import BudgetExceededError, EmptyControlRangeError, InfeasibleControlError

# slack on the admissibility bound u <= x + a + z - x_min, absorbs rounding of the right-hand side
FEASIBILITY_SLACK = 1e-12


class Cascade(NamedTuple):
    x_next: np.ndarray
    spill: np.ndarray
    outflow: np.ndarray
    upstream: np.ndarray
    feasible: np.ndarray


def spill_and_next(x, u, a, z, x_min, x_max):
    raw = x - u + a + z
    spill = np.maximum(0.0, raw - x_max)
    # spill only happens at capacity; clamping removes rounding noise on both bounds
    x_next = np.where(spill > 0, x_max, np.maximum(raw, x_min))
    return x_next, spill


def dam_step(dam: Dam, x: float, u: float, a: float, z: float) -> StageTransition:
    """ Apply the dynamics of one dam

    :param dam: The dam
    :param x: Current volume
    :param u: Turbined flow, one of the dam control levels
    :param a: Natural inflow
    :param z: Inflow coming from upstream dams (turbined plus spilled)
    :return: next volume, spilled volume and outflow ``u + s``
    """
    if not np.any(np.isclose(dam.levels, u, rtol=0.0, atol=FEASIBILITY_SLACK)):
        raise InfeasibleControlError(f"dam {dam.id}: u={u} is not a control level {list(dam.control_levels)}")
    bound = min(dam.u_max, x + a + z - dam.x_min)
    if u > bound + FEASIBILITY_SLACK:
        raise InfeasibleControlError(f"dam {dam.id}: u={u} exceeds admissible bound {bound} "
                                     f"(x={x}, a={a}, z={z})")
    x_next, spill = spill_and_next(x, u, a, z, dam.x_min, dam.x_max)
    spill = float(spill)
    return StageTransition(x_next=float(x_next), spill=spill, outflow=u + spill)


def control_range(dam: Dam, x: float, a: float, z: float) -> Tuple[float, ...]:
    """ Admissible discrete turbine levels, ``u_min <= u <= min(u_max, x + a + z - x_min)``

    :return: levels in increasing order
    """
    bound = min(dam.u_max, x + a + z - dam.x_min)
    if dam.u_min > bound + FEASIBILITY_SLACK:
        raise EmptyControlRangeError(f"dam {dam.id}: no admissible control at x={x}, a={a}, z={z} "
                                     f"(u_min={dam.u_min} > {bound})")
    return tuple(u for u in dam.control_levels if dam.u_min <= u <= bound + FEASIBILITY_SLACK)


def stage_cost(dam: Dam, u, p):
    """ Opposite of the turbining gain ``p u - epsilon u^2`` """
    return -p * u + dam.epsilon * u ** 2


def final_cost(dam: Dam, x_final):
    """ One-sided quadratic penalty below the target volume """
    return dam.penalty_a * np.minimum(0.0, x_final - dam.x_target) ** 2


def stage_costs(valley: Valley, u: np.ndarray, p: np.ndarray) -> np.ndarray:
    """ Valley stage cost, summed over the last (dam) axis """
    return np.sum(-p * u + valley.epsilon * u ** 2, axis=-1)


def final_costs(valley: Valley, x_final: np.ndarray) -> np.ndarray:
    """ Valley final cost, summed over the last (dam) axis """
    return np.sum(valley.penalty_a * np.minimum(0.0, x_final - valley.x_target) ** 2, axis=-1)


def cascade(valley: Valley, x: np.ndarray, a: np.ndarray, u: np.ndarray) -> Cascade:
    """ Evaluate all dams of the valley for one stage, upstream to downstream

    Arrays broadcast together, the last axis indexes dams. Combinations violating a control range are
    reported in ``feasible`` and their outputs are clamped into the box.

    :param valley: The valley
    :param x: Volumes
    :param a: Natural inflows
    :param u: Turbined flows
    :return: next volumes, spills, outflows, upstream inflows and the feasibility mask
    """
    x, a, u = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(a, dtype=float),
                                  np.asarray(u, dtype=float))
    shape = x.shape
    x_next = np.empty(shape)
    spill = np.empty(shape)
    outflow = np.empty(shape)
    upstream = np.zeros(shape)
    feasible = np.ones(shape[:-1], dtype=bool)
    topology = valley.topology
    for i in topology.order:
        dam = valley.dams[i]
        z = upstream[..., i]
        for child in topology.children[i]:
            z += outflow[..., child]
        bound = np.minimum(dam.u_max, x[..., i] + a[..., i] + z - dam.x_min)
        feasible &= u[..., i] <= bound + FEASIBILITY_SLACK
        x_next[..., i], spill[..., i] = spill_and_next(x[..., i], u[..., i], a[..., i], z, dam.x_min, dam.x_max)
        outflow[..., i] = u[..., i] + spill[..., i]
    return Cascade(x_next, spill, outflow, upstream, feasible)


def count_combinations(levels: Sequence[Sequence[float]]) -> int:
    return int(np.prod([len(level) for level in levels], dtype=float))


def control_combinations(valley: Valley, budget: Optional[int] = ENUMERATION_BUDGET) -> np.ndarray:
    """ All joint control vectors, lexicographic over dams in topological order with levels ascending

    :param valley: The valley
    :param budget: Maximal number of combinations, None for no limit
    :return: array of shape (combinations, dams)
    """
    order = valley.topology.order
    levels = [valley.dams[i].control_levels for i in order]
    size = count_combinations(levels)
    if budget is not None and size > budget:
        raise BudgetExceededError(f"{size} control combinations for {valley.n_dams} dams "
                                  f"(levels per dam {[len(level) for level in levels]}) exceed budget {budget}")
    product = np.array(list(itertools.product(*levels)), dtype=float).reshape(size, valley.n_dams)
    combinations = np.empty_like(product)
    combinations[:, list(order)] = product
    return combinations
