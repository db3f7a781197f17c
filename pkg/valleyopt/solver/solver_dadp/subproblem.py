import itertools
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from valleyopt.model.dynamics import FEASIBILITY_SLACK, final_cost, spill_and_next
from valleyopt.solver.one_step import CHUNK_ELEMENTS
from valleyopt.solver.solver_dadp.dual_state import DualState
from valleyopt.utils.data_models import Dam, Valley
from valleyopt.utils.exceptions import EmptyControlRangeError
from valleyopt.valuefn import GridValueFunction

# decisions of smaller probability are dropped from the kernels
KERNEL_CUTOFF = 1e-12


class DamMarginal(NamedTuple):
    """ Distinct (inflow, price) pairs a dam sees at one stage, and the joint atom to pair mapping """
    inflows: np.ndarray
    prices: np.ndarray
    probabilities: np.ndarray
    atom_map: np.ndarray


class StageKernel(NamedTuple):
    """
    Decisions of one stage as a sparse row-stochastic matrix. Rows are (knot, marginal atom) pairs in knot-major
    order, the entries of row r are ``start[r]:start[r + 1]``. The next volume of an entry is split between the
    knots ``lower`` and ``lower + 1`` with weight ``upper_weight`` on the latter.
    """
    start: np.ndarray
    weight: np.ndarray
    cumulative: np.ndarray
    z: np.ndarray
    outflow: np.ndarray
    lower: np.ndarray
    upper_weight: np.ndarray


class StageDecisions(NamedTuple):
    total: np.ndarray
    best: np.ndarray
    rows: np.ndarray
    entries: np.ndarray
    weight: np.ndarray


def dam_marginals(valley: Valley, i: int) -> List[DamMarginal]:
    marginals = []
    for stage in valley.noise.stages:
        pairs = np.stack([stage.inflows[:, i], stage.prices[:, i]], axis=1)
        unique, inverse = np.unique(pairs, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        probabilities = np.bincount(inverse, weights=stage.probabilities, minlength=len(unique))
        marginals.append(DamMarginal(unique[:, 0], unique[:, 1], probabilities, inverse))
    return marginals


def z_combinations(children: Sequence[int], z_levels: Dict[int, np.ndarray]) -> np.ndarray:
    """ Joint upstream inflows, lexicographic over children, shape (combinations, children) """
    if not children:
        return np.zeros((1, 0))
    return np.array(list(itertools.product(*(z_levels[c] for c in children))), dtype=float)


def knot_lottery(knots: np.ndarray, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Linear interpolation weights of volumes on a knot vector
    :param knots: Increasing knots
    :param x: Volumes
    :return: index of the knot below each volume and the weight of the knot above it
    """
    x = np.clip(np.asarray(x, dtype=float), knots[0], knots[-1])
    lower = np.clip(np.searchsorted(knots, x, side="right") - 1, 0, len(knots) - 2)
    weight = (x - knots[lower]) / (knots[lower + 1] - knots[lower])
    return lower, np.clip(weight, 0.0, 1.0)


def softmin(values: np.ndarray, smoothing: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Row-wise entropic minimum ``min q - tau log sum exp(-(q - min q) / tau)`` and its Boltzmann weights
    :param values: Costs, shape (rows, choices), infinite where inadmissible
    :param smoothing: Temperature tau, positive
    :return: smoothed minima of shape (rows,) and weights of shape (rows, choices)
    """
    minima = values.min(axis=1)
    scaled = np.exp(-(values - minima[:, None]) / smoothing)
    mass = scaled.sum(axis=1)
    return minima - smoothing * np.log(mass), scaled / mass[:, None]


def dam_decisions(dam: Dam, x: np.ndarray, a: np.ndarray, p: np.ndarray, z: np.ndarray, z_cost: np.ndarray,
                  outflow_price: float, continuation, smoothing: float = 0.0) -> StageDecisions:
    """
    Minimize the priced stage cost of one dam over its turbine levels and upstream inflow choices
    :param dam: The dam
    :param x: States, shape (m,)
    :param a: Inflows, shape (m,)
    :param p: Prices, shape (m,)
    :param z: Upstream inflow combinations, shape (c, children)
    :param z_cost: Multiplier cost of each combination, shape (c,)
    :param outflow_price: Multiplier paid for the outflow, zero for an outlet
    :param continuation: Cost-to-go of the dam, evaluated on an (n, 1) array
    :param smoothing: Temperature of the entropic minimum, zero for the exact minimum
    :return: the (smoothed) minimum, the argmin with turbine levels first then inflow combinations, and the
        decision weights as (row, choice, weight) triplets sorted by row
    """
    levels = dam.levels
    z_total = z.sum(axis=1)
    n_u, n_z = len(levels), len(z_total)
    m = len(x)
    rows = max(1, CHUNK_ELEMENTS // max(1, n_u * n_z))
    best = np.empty(m, dtype=int)
    total = np.empty(m)
    triplets = []
    for start in range(0, m, rows):
        chunk = slice(start, start + rows)
        xs, av, pv = x[chunk, None, None], a[chunk, None, None], p[chunk, None, None]
        u, zs = levels[None, :, None], z_total[None, None, :]
        feasible = u <= np.minimum(dam.u_max, xs + av + zs - dam.x_min) + FEASIBILITY_SLACK
        x_next, spill = spill_and_next(xs, u, av, zs, dam.x_min, dam.x_max)
        x_next = np.broadcast_to(x_next, feasible.shape)
        values = (-pv * u + dam.epsilon * u ** 2 + z_cost[None, None, :] - outflow_price * (u + spill)
                  + continuation(x_next.reshape(-1, 1)).reshape(feasible.shape))
        values = np.where(feasible, values, np.inf).reshape(len(xs), n_u * n_z)
        index = np.argmin(values, axis=1)
        minima = values[np.arange(len(index)), index]
        if not np.all(np.isfinite(minima)):
            row = start + int(np.argmin(np.isfinite(minima)))
            raise EmptyControlRangeError(f"dam {dam.id}: no admissible control at x={x[row]}, a={a[row]}")
        best[chunk] = index
        if smoothing > 0:
            total[chunk], weights = softmin(values, smoothing)
            r, c = np.nonzero(weights > KERNEL_CUTOFF)
            w = weights[r, c]
            w = w / np.bincount(r, weights=w, minlength=len(xs))[r]
            triplets.append((r + start, c, w))
        else:
            total[chunk] = minima
            triplets.append((np.arange(start, start + len(xs)), index, np.ones(len(xs))))
    r, c, w = (np.concatenate(parts) for parts in zip(*triplets))
    return StageDecisions(total, best, r, c, w)


def _stage_kernel(dam: Dam, knots: np.ndarray, x, a, z: np.ndarray, decisions: StageDecisions) -> StageKernel:
    n_z = len(z)
    i_u, i_z = np.divmod(decisions.entries, n_z)
    rows = decisions.rows
    u, zs = dam.levels[i_u], z[i_z]
    x_next, spill = spill_and_next(x[rows], u, a[rows], zs.sum(axis=1), dam.x_min, dam.x_max)
    lower, upper_weight = knot_lottery(knots, x_next)
    start = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=len(x)))])
    return StageKernel(start, decisions.weight, np.concatenate([[0.0], np.cumsum(decisions.weight)]), zs,
                       u + spill, lower, upper_weight)


def _dam_final(dam: Dam):
    def continuation(points: np.ndarray) -> np.ndarray:
        return final_cost(dam, points[:, 0])
    return continuation


class SubproblemSolution:
    """
    One dam's subproblem under given expected multipliers: value functions on the dam's knots for t = 0..T,
    argmin tables per stage (knot x marginal atom), the decision kernels that drive the gradient and the
    optimal value at the initial volume
    """

    def __init__(self, dam: Dam, index: int, knots: np.ndarray, value_functions: List[GridValueFunction],
                 u_table: List[np.ndarray], z_table: List[np.ndarray], kernels: List[StageKernel],
                 marginals: List[DamMarginal], children: Sequence[int], smoothing: float):
        self.dam = dam
        self.index = index
        self.knots = knots
        self.value_functions = value_functions
        self.u_table = u_table
        self.z_table = z_table
        self.kernels = kernels
        self.marginals = marginals
        self.children = tuple(children)
        self.smoothing = smoothing
        self.value = float(value_functions[0](np.array([dam.x0])))

    def initial_lottery(self) -> Tuple[int, float]:
        """ Knot below the initial volume and the interpolation weight of the knot above """
        lower, weight = knot_lottery(self.knots, np.array([self.dam.x0]))
        return int(lower[0]), float(weight[0])


def solve_subproblem(valley: Valley, i: int, dual: Union[DualState, np.ndarray], z_levels: Dict[int, np.ndarray],
                     knots: np.ndarray, smoothing: float = 0.0) -> SubproblemSolution:
    """
    Backward dynamic programming on one dam with the flow couplings priced by the expected multipliers:
    stage cost ``L + sum_c lambda^c z_c - lambda^i g`` where ``c`` runs over the dams feeding dam i.
    A positive ``smoothing`` replaces the minimum over decisions by its entropic smoothing, a lower value that
    is differentiable in the multipliers.
    :param valley: The valley
    :param i: Dam index
    :param dual: Expected multipliers, shape (T, links)
    :param z_levels: Admissible inflow values per link
    :param knots: Knot vector of the dam volume
    :param smoothing: Temperature of the entropic minimum, zero for the exact subproblem
    :return: value functions, argmin tables, decision kernels and optimal value of the subproblem
    """
    multipliers = np.asarray(getattr(dual, "multipliers", dual), dtype=float)
    topology = valley.topology
    if not 0 <= i < valley.n_dams:
        raise IndexError(f"dam index {i} out of range for {valley.n_dams} dams")
    position = {link: k for k, link in enumerate(topology.links)}
    dam = valley.dams[i]
    knots = np.asarray(knots, dtype=float)
    children = topology.children[i]
    z = z_combinations(children, z_levels)
    z_cost = np.stack([z @ multipliers[t, [position[c] for c in children]] for t in range(valley.horizon)])
    outflow_price = (multipliers[:, position[i]] if i in position else np.zeros(valley.horizon))
    marginals = dam_marginals(valley, i)

    horizon = valley.horizon
    value_functions: List[Optional[GridValueFunction]] = [None] * (horizon + 1)
    value_functions[horizon] = GridValueFunction([knots], final_cost(dam, knots), stage=horizon)
    u_table, z_table, kernels = [None] * horizon, [None] * horizon, [None] * horizon
    for t in range(horizon - 1, -1, -1):
        stage = marginals[t]
        n, m = len(knots), len(stage.probabilities)
        continuation = value_functions[t + 1] if t + 1 < horizon else _dam_final(dam)
        x, a, p = np.repeat(knots, m), np.tile(stage.inflows, n), np.tile(stage.prices, n)
        decisions = dam_decisions(dam, x, a, p, z, z_cost[t], outflow_price[t], continuation, smoothing)
        value_functions[t] = GridValueFunction([knots], decisions.total.reshape(n, m) @ stage.probabilities,
                                               stage=t)
        i_u, i_z = np.divmod(decisions.best, len(z))
        u_table[t] = dam.levels[i_u].reshape(n, m)
        z_table[t] = z[i_z].reshape(n, m, len(children))
        kernels[t] = _stage_kernel(dam, knots, x, a, z, decisions)
    return SubproblemSolution(dam, i, knots, value_functions, u_table, z_table, kernels, marginals, children,
                              smoothing)
