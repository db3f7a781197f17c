from typing import Optional

import numpy as np

from valleyopt.config import CUT_CAPACITY, VALUE_FLOOR
from valleyopt.valuefn.value_function import ValueFunction


class CutPool(ValueFunction):
    """ Maximum of affine cuts ``intercept + gradient . x`` with first-in first-out retention """
    kind = "cuts"

    def __init__(self, dim: int, capacity: int = CUT_CAPACITY, stage: int = 0, floor: float = VALUE_FLOOR,
                 lower: Optional[np.ndarray] = None, upper: Optional[np.ndarray] = None):
        """
        :param dim: State dimension
        :param capacity: Number of cuts kept, the oldest cut is evicted first
        :param stage: Stage index
        :param floor: Value returned while the pool is empty
        :param lower: Lower corner of the state box
        :param upper: Upper corner of the state box
        """
        if capacity < 1:
            raise ValueError(f"capacity must be positive, got {capacity}")
        super().__init__(dim=dim, stage=stage, lower=lower, upper=upper)
        self.capacity = capacity
        self.floor = floor
        self.intercepts = np.empty(0)
        self.gradients = np.empty((0, dim))
        # state at which each cut was generated, nan when unknown
        self.points = np.empty((0, dim))

    def __len__(self) -> int:
        return len(self.intercepts)

    def add_cut(self, intercept: float, gradient, point=None) -> "CutPool":
        """
        Append a cut, evicting the oldest one when the pool is full
        :param intercept: Value of the cut at the origin
        :param gradient: Slope, one entry per dimension
        :param point: State the cut was computed at
        :return: the pool itself
        """
        gradient = np.asarray(gradient, dtype=float).reshape(self.dim)
        if not np.isfinite(intercept) or not np.all(np.isfinite(gradient)):
            raise ValueError(f"non-finite cut ({intercept}, {gradient.tolist()})")
        point = np.full(self.dim, np.nan) if point is None else np.asarray(point, dtype=float).reshape(self.dim)
        self.intercepts = np.append(self.intercepts, float(intercept))[-self.capacity:]
        self.gradients = np.vstack([self.gradients, gradient])[-self.capacity:]
        self.points = np.vstack([self.points, point])[-self.capacity:]
        return self

    def _evaluate(self, points: np.ndarray) -> np.ndarray:
        if len(self) == 0:
            return np.full(len(points), self.floor)
        return np.max(self.intercepts[None, :] + points @ self.gradients.T, axis=1)

    def prune_dominated(self, points: Optional[np.ndarray] = None, tolerance: float = 1e-12) -> int:
        """
        Level-1 dominance pruning: keep only cuts reaching the maximum at one of the given points at least
        :param points: Array of shape (n, dim), defaults to the points the cuts were generated at
        :param tolerance: Absolute slack when comparing to the maximum
        :return: the number of removed cuts
        """
        if len(self) == 0:
            return 0
        if points is None:
            points = self.points[~np.any(np.isnan(self.points), axis=1)]
            if len(points) == 0:
                return 0
        points = np.atleast_2d(np.asarray(points, dtype=float))
        values = self.intercepts[None, :] + points @ self.gradients.T
        active = np.any(values >= values.max(axis=1, keepdims=True) - tolerance, axis=0)
        removed = int(np.sum(~active))
        self.intercepts = self.intercepts[active]
        self.gradients = self.gradients[active]
        self.points = self.points[active]
        return removed
