from abc import ABC, abstractmethod
from typing import Optional

import numpy as np

from valleyopt.config import BOX_TOLERANCE
from valleyopt.utils.exceptions import OutOfBoxError


class ValueFunction(ABC):
    """
    ValueFunction defines the evaluation interface shared by the Bellman function approximations,
    whatever the representation (interpolated grid or pool of cuts)
    """
    kind: str = None

    def __init__(self, dim: int, stage: int = 0, lower: Optional[np.ndarray] = None,
                 upper: Optional[np.ndarray] = None):
        """
        :param dim: State dimension
        :param stage: Stage index the function is attached to
        :param lower: Lower corner of the state box
        :param upper: Upper corner of the state box
        """
        self.dim = dim
        self.stage = stage
        self.lower = None if lower is None else np.asarray(lower, dtype=float)
        self.upper = None if upper is None else np.asarray(upper, dtype=float)

    def clamp(self, points: np.ndarray, tolerance: float = BOX_TOLERANCE) -> np.ndarray:
        """
        Project query points on the state box, rejecting points farther than ``tolerance``
        :param points: Array of shape (n, dim)
        :param tolerance: Accepted distance to the box
        :return: the clamped points
        """
        if self.lower is None:
            return points
        if np.any(points < self.lower - tolerance) or np.any(points > self.upper + tolerance):
            worst = np.max(np.maximum(self.lower - points, points - self.upper))
            raise OutOfBoxError(f"stage {self.stage}: query {worst:.3g} outside the state box "
                                f"[{self.lower.tolist()}, {self.upper.tolist()}]")
        return np.clip(points, self.lower, self.upper)

    def evaluate(self, points) -> np.ndarray:
        """
        Evaluate the function at a batch of states
        :param points: Array of shape (n, dim), or (dim,) for a single state
        :return: Array of shape (n,), or a float for a single state
        """
        points = np.asarray(points, dtype=float)
        single = points.ndim == 1
        points = self.clamp(np.atleast_2d(points).reshape(-1, self.dim))
        values = self._evaluate(points)
        return float(values[0]) if single else values

    def __call__(self, points):
        return self.evaluate(points)

    @abstractmethod
    def _evaluate(self, points: np.ndarray) -> np.ndarray:
        """
        Evaluate on points already inside the box
        :param points: Array of shape (n, dim)
        :return: Array of shape (n,)
        """
        pass
