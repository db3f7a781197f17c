from typing import List, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from valleyopt.valuefn.value_function import ValueFunction


def make_knots(x_min: float, x_max: float, n_knots: int) -> np.ndarray:
    """ Equispaced knots covering ``[x_min, x_max]`` """
    if n_knots < 2:
        raise ValueError(f"at least two knots are needed, got {n_knots}")
    if not x_max > x_min:
        raise ValueError(f"degenerate interval [{x_min}, {x_max}] cannot carry a grid")
    knots = np.linspace(x_min, x_max, n_knots)
    knots[0], knots[-1] = x_min, x_max
    return knots


def grid_nodes(knots: Sequence[np.ndarray]) -> np.ndarray:
    """ Nodes of the knot product in C order, shape (n_nodes, dims) """
    mesh = np.meshgrid(*knots, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def make_valley_knots(valley, n_knots: int) -> List[np.ndarray]:
    return [make_knots(dam.x_min, dam.x_max, n_knots) for dam in valley.dams]


class GridValueFunction(ValueFunction):
    """ Multilinear interpolation of values stored on a tensor grid """
    kind = "grid"

    def __init__(self, knots: Sequence[np.ndarray], values: np.ndarray, stage: int = 0):
        """
        :param knots: Strictly increasing knot vector per dimension, first and last knots are the box bounds
        :param values: Array over the knot product, shape ``tuple(len(k) for k in knots)``
        :param stage: Stage index
        """
        knots = [np.asarray(k, dtype=float) for k in knots]
        values = np.asarray(values, dtype=float)
        errors = []
        for d, k in enumerate(knots):
            if k.ndim != 1 or len(k) < 2:
                errors.append(f"dimension {d}: need at least two knots")
            elif np.any(np.diff(k) <= 0):
                errors.append(f"dimension {d}: knots not strictly increasing")
        if values.shape != tuple(len(k) for k in knots):
            errors.append(f"values of shape {values.shape} for a grid of shape {tuple(len(k) for k in knots)}")
        elif not np.all(np.isfinite(values)):
            errors.append("non-finite values")
        if errors:
            raise ValueError("; ".join(errors))
        super().__init__(dim=len(knots), stage=stage,
                         lower=np.array([k[0] for k in knots]), upper=np.array([k[-1] for k in knots]))
        self.knots = knots
        self.values = values
        self._interpolator = None

    @property
    def interpolator(self) -> RegularGridInterpolator:
        if self._interpolator is None:
            self._interpolator = RegularGridInterpolator(tuple(self.knots), self.values, method="linear")
        return self._interpolator

    def nodes(self) -> np.ndarray:
        """ All grid nodes, C order over the knot product, shape (n_nodes, dim) """
        return grid_nodes(self.knots)

    def _evaluate(self, points: np.ndarray) -> np.ndarray:
        return self.interpolator(points)

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_interpolator"] = None
        return state
