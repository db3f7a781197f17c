from typing import Callable, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from valleyopt.model.dynamics import Cascade, cascade, final_costs, stage_costs
from valleyopt.utils.data_models import StageNoise, Valley
from valleyopt.utils.exceptions import EmptyControlRangeError

# upper bound on (states x combinations x dams) floats materialized at once
CHUNK_ELEMENTS = 1 << 21

Continuation = Callable[[np.ndarray], np.ndarray]
Noise = Union[int, Tuple[Sequence[float], Sequence[float]]]


class OneStep(NamedTuple):
    index: np.ndarray
    controls: np.ndarray
    transition: Cascade
    stage_cost: np.ndarray
    total: np.ndarray


class Decision(NamedTuple):
    controls: np.ndarray
    transition: Cascade
    stage_cost: float
    fallback: bool = False


def final_continuation(valley: Valley) -> Continuation:
    def continuation(points: np.ndarray) -> np.ndarray:
        return final_costs(valley, points)
    return continuation


def resolve_noise(valley: Valley, t: int, w: Noise) -> Tuple[np.ndarray, np.ndarray]:
    """ Inflow and price vectors of a stage-t atom index, or of an explicit ``(inflows, prices)`` pair """
    if isinstance(w, (int, np.integer)):
        stage = valley.noise.stages[t]
        return stage.inflows[w], stage.prices[w]
    inflows, prices = w
    return np.asarray(inflows, dtype=float), np.asarray(prices, dtype=float)


def one_step_argmin(valley: Valley, x: np.ndarray, a: np.ndarray, p: np.ndarray, continuation: Continuation,
                    combinations: np.ndarray) -> OneStep:
    """ Minimize stage cost plus continuation over an enumerated set of joint controls, state by state

    Ties keep the first combination, so the lexicographic order of ``combinations`` decides.

    :param valley: The valley
    :param x: States, shape (m, dams)
    :param a: Inflows, broadcastable to ``x``
    :param p: Prices, broadcastable to ``x``
    :param continuation: Cost-to-go evaluated on a batch of next states
    :param combinations: Candidate joint controls, shape (c, dams)
    :return: chosen combination index, controls, transition, stage cost and optimal total per state
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    a = np.broadcast_to(np.asarray(a, dtype=float), x.shape)
    p = np.broadcast_to(np.asarray(p, dtype=float), x.shape)
    m, d = x.shape
    rows = max(1, CHUNK_ELEMENTS // max(1, len(combinations) * d))
    index = np.empty(m, dtype=int)
    total = np.empty(m)
    for start in range(0, m, rows):
        chunk = slice(start, start + rows)
        step = cascade(valley, x[chunk, None, :], a[chunk, None, :], combinations[None, :, :])
        cost = stage_costs(valley, combinations[None, :, :], p[chunk, None, :])
        values = cost + continuation(step.x_next.reshape(-1, d)).reshape(cost.shape)
        values = np.where(step.feasible, values, np.inf)
        best = np.argmin(values, axis=1)
        best_values = values[np.arange(len(best)), best]
        if not np.all(np.isfinite(best_values)):
            row = start + int(np.argmin(np.isfinite(best_values)))
            raise EmptyControlRangeError(f"no admissible joint control at x={x[row].tolist()}, "
                                         f"a={a[row].tolist()}")
        index[chunk] = best
        total[chunk] = best_values
    controls = combinations[index]
    transition = cascade(valley, x, a, controls)
    return OneStep(index, controls, transition, stage_costs(valley, controls, p), total)


def expected_one_step_values(valley: Valley, points: np.ndarray, stage: StageNoise, continuation: Continuation,
                             combinations: np.ndarray) -> np.ndarray:
    """ Hazard-decision one-step values: atom-weighted expectation of the per-atom minima

    :param valley: The valley
    :param points: States, shape (n, dams)
    :param stage: Noise of the stage
    :param continuation: Cost-to-go of the next stage
    :param combinations: Candidate joint controls
    :return: Array of shape (n,)
    """
    values = np.zeros(len(points))
    for probability, a, p in zip(stage.probabilities, stage.inflows, stage.prices):
        values += probability * one_step_argmin(valley, points, a, p, continuation, combinations).total
    return values


def single_decision(valley: Valley, x, w: Noise, t: int, continuation: Continuation,
                    combinations: np.ndarray) -> Decision:
    a, p = resolve_noise(valley, t, w)
    step = one_step_argmin(valley, np.asarray(x, dtype=float)[None, :], a[None, :], p[None, :], continuation,
                           combinations)
    transition = Cascade(*(field[0] for field in step.transition))
    return Decision(step.controls[0], transition, float(step.stage_cost[0]))


def optional_continuation(value_function: Optional[Callable], valley: Valley) -> Continuation:
    return final_continuation(valley) if value_function is None else value_function
