import logging
from typing import NamedTuple, Optional

import numpy as np

from valleyopt.config import ENUMERATION_BUDGET
from valleyopt.evaluation.global_value import GlobalValue
from valleyopt.model.dynamics import Cascade, cascade, control_combinations, count_combinations, stage_costs
from valleyopt.solver.one_step import Continuation, Decision, Noise, one_step_argmin, resolve_noise
from valleyopt.utils.data_models import Valley
from valleyopt.utils.exceptions import EmptyControlRangeError

MAX_SWEEPS = 5
# absolute and relative slack of the admissibility checks on simulated transitions
CHECK_TOLERANCE = 1e-9


class PolicyStep(NamedTuple):
    controls: np.ndarray
    transition: Cascade
    stage_cost: np.ndarray
    fallback: bool


def coordinate_descent(valley: Valley, x: np.ndarray, a: np.ndarray, p: np.ndarray, continuation: Continuation,
                       max_sweeps: int = MAX_SWEEPS) -> np.ndarray:
    """
    Approximate one-step minimization when the joint enumeration is too large: starting from the lowest
    levels, re-optimize one dam at a time in topological order until no dam changes or ``max_sweeps``
    :return: controls of shape (m, dams)
    """
    m, d = x.shape
    u = np.tile([dam.levels[0] for dam in valley.dams], (m, 1))
    step = cascade(valley, x, a, u)
    value = np.where(step.feasible, stage_costs(valley, u, p) + continuation(step.x_next), np.inf)
    rows = np.arange(m)
    for sweep in range(max_sweeps):
        changed = np.zeros(m, dtype=bool)
        for i in valley.topology.order:
            levels = valley.dams[i].levels
            candidates = np.repeat(u[:, None, :], len(levels), axis=1)
            candidates[:, :, i] = levels[None, :]
            step = cascade(valley, x[:, None, :], a[:, None, :], candidates)
            values = stage_costs(valley, candidates, p[:, None, :]) + continuation(
                step.x_next.reshape(-1, d)).reshape(m, len(levels))
            values = np.where(step.feasible, values, np.inf)
            best = np.argmin(values, axis=1)
            improved = values[rows, best] < value - 1e-12
            u[improved, i] = levels[best[improved]]
            value[improved] = values[rows, best][improved]
            changed |= improved
        if not np.any(changed):
            break
    if not np.all(np.isfinite(value)):
        row = int(np.argmin(np.isfinite(value)))
        raise EmptyControlRangeError(f"coordinate descent found no admissible control at x={x[row].tolist()}")
    return u


def policy_step(valley: Valley, global_value: GlobalValue, t: int, x: np.ndarray, a: np.ndarray, p: np.ndarray,
                combinations: Optional[np.ndarray] = None, budget: int = ENUMERATION_BUDGET) -> PolicyStep:
    """
    One-step dynamic programming against the global value, for a batch of states and noises. Controls cascade
    downstream, so every link carries exactly the outflow of its upstream dam.
    :param valley: The valley
    :param global_value: Approximate cost-to-go
    :param t: Stage
    :param x: States, shape (m, dams)
    :param a: Inflows, shape (m, dams)
    :param p: Prices, shape (m, dams)
    :param combinations: Pre-computed joint controls, None to enumerate or fall back
    :param budget: Largest enumeration, coordinate descent beyond it
    """
    continuation = global_value.continuation(t)
    if combinations is None and count_combinations([dam.control_levels for dam in valley.dams]) <= budget:
        combinations = control_combinations(valley, budget)
    if combinations is not None:
        step = one_step_argmin(valley, x, a, p, continuation, combinations)
        return PolicyStep(step.controls, step.transition, step.stage_cost, False)
    u = coordinate_descent(valley, x, a, p, continuation)
    return PolicyStep(u, cascade(valley, x, a, u), stage_costs(valley, u, p), True)


def one_step_policy(valley: Valley, global_value: GlobalValue, t: int, x, w: Noise,
                    budget: int = ENUMERATION_BUDGET) -> Decision:
    """
    Feasible joint control at stage t for one state and one observed noise
    :param valley: The valley
    :param global_value: Approximate cost-to-go
    :param t: Stage
    :param x: State vector
    :param w: Atom index of stage t, or an ``(inflows, prices)`` pair
    :param budget: Largest enumeration, coordinate descent beyond it
    :return: the control, its cascaded transition, stage cost and whether the fallback was used
    """
    a, p = resolve_noise(valley, t, w)
    step = policy_step(valley, global_value, t, np.asarray(x, dtype=float)[None, :], a[None, :], p[None, :],
                       budget=budget)
    if step.fallback:
        logging.warning(f"stage {t}: joint enumeration above budget {budget}, coordinate descent used")
    return Decision(step.controls[0], Cascade(*(field[0] for field in step.transition)), float(step.stage_cost[0]),
                    step.fallback)


def check_transition(valley: Valley, x: np.ndarray, a: np.ndarray, u: np.ndarray, transition: Cascade,
                     tolerance: float = CHECK_TOLERANCE) -> np.ndarray:
    """
    Replay the dynamics of every dam and flag rows breaking water balance, volume bounds, control ranges,
    spill rules or link couplings
    :return: boolean mask of shape (m,), True where something is violated
    """
    x_next, spill = transition.x_next, transition.spill
    z = np.zeros_like(x)
    for i in valley.topology.order:
        for child in valley.topology.children[i]:
            z[:, i] += u[:, child] + spill[:, child]
    scale = 1.0 + np.abs(x) + np.abs(a) + np.abs(z)
    slack = tolerance * scale
    on_level = np.stack([np.any(np.abs(u[:, [i]] - dam.levels[None, :]) <= slack[:, [i]], axis=1)
                         for i, dam in enumerate(valley.dams)], axis=1)
    violated = ~on_level
    violated |= u > np.minimum(valley.u_max, x + a + z - valley.x_min) + slack
    violated |= np.abs(x_next - (x - u + a + z - spill)) > slack
    violated |= (x_next < valley.x_min - slack) | (x_next > valley.x_max + slack)
    violated |= spill < -slack
    violated |= (spill > slack) & (np.abs(x_next - valley.x_max) > slack)
    violated |= np.abs(transition.upstream - z) > slack
    return np.any(violated, axis=1)
