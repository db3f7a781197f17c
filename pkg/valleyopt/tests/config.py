import itertools
import math
import os
from functools import lru_cache
from typing import List, Optional, Sequence

from valleyopt.model.dynamics import dam_step, final_cost, stage_cost
from valleyopt.utils.data_models import Atom, Dam, NoiseProcess, StageNoise, Valley, ValleyTopology
from valleyopt.utils.exceptions import InfeasibleControlError

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")
ONE_DAM_FILE = os.path.join(DATA_DIR, "one_dam.json")
FOUR_DAM_CHAIN_FILE = os.path.join(DATA_DIR, "four_dam_chain.json")
BAD_PROBABILITIES_FILE = os.path.join(DATA_DIR, "bad_probabilities.json")


def make_dam(id: int = 1, x_min: float = 0.0, x_max: float = 10.0, u_max: float = 3.0,
             levels: Optional[Sequence[float]] = None, x0: float = 5.0, x_target: float = 0.0,
             penalty_a: float = 0.0, epsilon: float = 0.0, u_min: float = 0.0) -> Dam:
    if levels is None:
        levels = [float(u) for u in range(int(u_max) + 1)]
    return Dam(id=id, x_min=x_min, x_max=x_max, u_min=u_min, u_max=u_max, x_target=x_target, penalty_a=penalty_a,
               epsilon=epsilon, control_levels=tuple(levels), x0=x0)


def make_valley(dams: List[Dam], parents: Sequence[Optional[int]], stages: List[List[tuple]],
                name: str = None) -> Valley:
    """ ``stages[t]`` lists ``(p, inflows, prices)`` atoms """
    noise = NoiseProcess(stages=tuple(
        StageNoise(atoms=tuple(Atom(p=p, inflows=tuple(a), prices=tuple(c)) for p, a, c in atoms))
        for atoms in stages
    ))
    return Valley(topology=ValleyTopology(n_dams=len(dams), parent=tuple(parents)), dams=tuple(dams), noise=noise,
                  name=name)


def deterministic_valley(dams: List[Dam], parents: Sequence[Optional[int]], inflows: List[List[float]],
                         prices: List[List[float]]) -> Valley:
    return make_valley(dams, parents, [[(1.0, a, c)] for a, c in zip(inflows, prices)])


def one_dam_one_stage() -> Valley:
    """ x0 = 5, levels 0..5, price 1, no inflow: the optimum turbines everything """
    return deterministic_valley([make_dam(u_max=5.0)], [None], [[0.0]], [[1.0]])


def price_spread_valley() -> Valley:
    """ One dam over three stages with prices 1, 3, 2 and unit inflows. Optimal payoff 17. """
    return deterministic_valley([make_dam(u_max=3.0)], [None], [[1.0], [1.0], [1.0]], [[1.0], [3.0], [2.0]])


def two_dam_desk_valley() -> Valley:
    """ Two-dam chain, one stage. Optimal cost -6; dual function lambda - 8 on (-1, 2). """
    upstream = make_dam(id=1, x_max=4.0, u_max=2.0, x0=2.0)
    downstream = make_dam(id=2, x_max=10.0, u_max=3.0, x0=0.0)
    return deterministic_valley([upstream, downstream], [1, None], [[0.0, 0.0]], [[1.0, 2.0]])


def spill_valley() -> Valley:
    """ A full upstream dam spills most of its inflow of 8; downstream turbines 6 of it. Optimal cost -8. """
    upstream = make_dam(id=1, x_max=10.0, u_max=2.0, x0=10.0)
    downstream = make_dam(id=2, x_max=10.0, u_max=6.0, x0=0.0)
    return deterministic_valley([upstream, downstream], [1, None], [[8.0, 0.0]], [[1.0, 1.0]])


def two_dam_stochastic_valley() -> Valley:
    """ Two-dam chain over two stages with generic prices. Integer volumes stay on integer knots. """
    upstream = make_dam(id=1, x_max=4.0, u_max=2.0, x0=2.0, epsilon=0.05)
    downstream = make_dam(id=2, x_max=6.0, u_max=3.0, x0=3.0, x_target=3.0, penalty_a=0.7, epsilon=0.03)
    stages = [
        [(0.35, [1.0, 0.0], [2.31, 1.73]), (0.65, [2.0, 1.0], [1.46, 2.57])],
        [(0.35, [0.0, 1.0], [1.92, 2.84]), (0.65, [1.0, 0.0], [2.63, 1.18])],
    ]
    return make_valley([upstream, downstream], [1, None], stages)


def three_dam_valley() -> Valley:
    """ Three-dam chain over three stages with two atoms per stage """
    dams = [
        make_dam(id=1, x_max=4.0, u_max=2.0, x0=2.0, x_target=2.0, penalty_a=1.0),
        make_dam(id=2, x_max=4.0, u_max=2.0, x0=2.0, x_target=2.0, penalty_a=1.0),
        make_dam(id=3, x_max=4.0, u_max=3.0, x0=2.0, x_target=2.0, penalty_a=1.0),
    ]
    stages = [
        [(0.5, [1.0, 1.0, 0.0], [3.0, 3.0, 3.0]), (0.5, [0.0, 1.0, 1.0], [2.0, 2.0, 2.0])],
        [(0.5, [2.0, 0.0, 0.0], [1.0, 1.0, 1.0]), (0.5, [0.0, 0.0, 1.0], [4.0, 4.0, 4.0])],
        [(0.5, [1.0, 0.0, 1.0], [2.0, 2.0, 2.0]), (0.5, [1.0, 1.0, 0.0], [3.0, 3.0, 3.0])],
    ]
    return make_valley(dams, [1, 2, None], stages)


def integer_knots(valley: Valley) -> list:
    """ One knot per integer volume: keeps integer instances exact on the grid """
    return [[float(v) for v in range(int(dam.x_min), int(dam.x_max) + 1)] for dam in valley.dams]


def brute_force_cost(valley: Valley) -> float:
    """ Optimal expected cost by exhaustive recursion over the scenario tree, dam by dam through ``dam_step`` """
    order = valley.topology.order
    children = valley.topology.children
    joint_levels = list(itertools.product(*(dam.control_levels for dam in valley.dams)))

    @lru_cache(maxsize=None)
    def cost_to_go(t: int, x: tuple) -> float:
        if t == valley.horizon:
            return sum(float(final_cost(dam, xi)) for dam, xi in zip(valley.dams, x))
        expected = 0.0
        for atom in valley.noise.stages[t].atoms:
            best = math.inf
            for u in joint_levels:
                x_next, outflow = [0.0] * valley.n_dams, [0.0] * valley.n_dams
                try:
                    for i in order:
                        z = sum(outflow[c] for c in children[i])
                        transition = dam_step(valley.dams[i], x[i], u[i], atom.inflows[i], z)
                        x_next[i], outflow[i] = transition.x_next, transition.outflow
                except InfeasibleControlError:
                    continue
                cost = sum(float(stage_cost(dam, ui, pi)) for dam, ui, pi in zip(valley.dams, u, atom.prices))
                best = min(best, cost + cost_to_go(t + 1, tuple(x_next)))
            expected += atom.p * best
        return expected

    return cost_to_go(0, tuple(dam.x0 for dam in valley.dams))
