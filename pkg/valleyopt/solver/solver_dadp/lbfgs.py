from collections import deque
from typing import Any, Callable, NamedTuple, Optional, Tuple

import numpy as np

Objective = Callable[[np.ndarray], Tuple[float, np.ndarray, Any]]


class LineSearchResult(NamedTuple):
    step: float
    point: np.ndarray
    value: float
    gradient: np.ndarray
    payload: Any
    trials: int


class LbfgsMemory:
    """ Limited-memory approximation of the inverse Hessian from the last curvature pairs """

    def __init__(self, memory: int = 10):
        self.pairs = deque(maxlen=memory)

    def __len__(self) -> int:
        return len(self.pairs)

    def reset(self):
        self.pairs.clear()

    def update(self, s: np.ndarray, y: np.ndarray, eps: float = 1e-12) -> bool:
        """
        Store the pair when the curvature condition ``s.y > 0`` holds
        :return: whether the pair was stored
        """
        sy = float(s @ y)
        if sy <= eps * float(np.linalg.norm(s) * np.linalg.norm(y)):
            return False
        self.pairs.append((s.copy(), y.copy(), 1.0 / sy))
        return True

    def direction(self, gradient: np.ndarray) -> np.ndarray:
        """ Two-loop recursion: returns ``-H gradient`` """
        q = gradient.copy()
        alphas = []
        for s, y, rho in reversed(self.pairs):
            alpha = rho * float(s @ q)
            q -= alpha * y
            alphas.append(alpha)
        if self.pairs:
            s, y, _ = self.pairs[-1]
            q *= float(s @ y) / float(y @ y)
        for (s, y, rho), alpha in zip(self.pairs, reversed(alphas)):
            beta = rho * float(y @ q)
            q += (alpha - beta) * s
        return -q


def armijo_search(objective: Objective, x: np.ndarray, value: float, gradient: np.ndarray, direction: np.ndarray,
                  step: float = 1.0, c1: float = 1e-4, shrink: float = 0.5,
                  max_trials: int = 20) -> Optional[LineSearchResult]:
    """
    Backtracking until sufficient decrease ``f(x + t d) <= f(x) + c1 t g.d``
    :param objective: Function returning value, gradient and a payload
    :param x: Current point
    :param value: Objective at x
    :param gradient: Gradient at x
    :param direction: Descent direction
    :param step: First trial step
    :param c1: Sufficient decrease constant
    :param shrink: Step reduction factor
    :param max_trials: Number of trials before giving up
    :return: the accepted point, or None when no trial decreased enough
    """
    slope = float(gradient.ravel() @ direction.ravel())
    for trial in range(1, max_trials + 1):
        point = x + step * direction
        new_value, new_gradient, payload = objective(point)
        if new_value <= value + c1 * step * slope:
            return LineSearchResult(step, point, new_value, new_gradient, payload, trial)
        step *= shrink
    return None
