from typing import Callable, List, Optional

import numpy as np

from valleyopt.model.dynamics import final_costs
from valleyopt.solver.solver import SolverResult
from valleyopt.utils.data_models import Valley

KINDS = {"dp": "dp-grid", "sddpd": "sddp-cuts", "dadp": "dadp-sum"}


class GlobalValue:
    """
    Approximate Bellman functions of the whole valley, whatever solver produced them. The final stage
    always uses the exact final cost.
    """

    def __init__(self, kind: str, valley: Valley, value_functions: Optional[List] = None):
        """
        :param kind: One of ``dp-grid``, ``sddp-cuts``, ``dadp-sum`` or ``zero``
        :param valley: The valley the functions were computed for
        :param value_functions: Per-stage functions, or per-dam lists of 1-D functions for ``dadp-sum``
        """
        if kind not in set(KINDS.values()) | {"zero"}:
            raise ValueError(f"unknown value function kind {kind}")
        if kind != "zero" and value_functions is None:
            raise ValueError(f"{kind} needs value functions")
        self.kind = kind
        self.valley = valley
        self.value_functions = value_functions

    @classmethod
    def zero(cls, valley: Valley) -> "GlobalValue":
        return cls("zero", valley)

    @classmethod
    def from_solution(cls, result: SolverResult, valley: Valley) -> "GlobalValue":
        if result.horizon != valley.horizon or result.n_dams != valley.n_dams:
            raise ValueError(f"{result.method} solution for {result.n_dams} dams over {result.horizon} stages, "
                             f"valley has {valley.n_dams} dams over {valley.horizon} stages")
        return cls(KINDS[result.method], valley, result.value_functions)

    def evaluate(self, t: int, x: np.ndarray) -> np.ndarray:
        """
        Approximate cost-to-go at time t
        :param t: Time, 0..T
        :param x: States, shape (n, dams)
        :return: Array of shape (n,)
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if t == self.valley.horizon:
            return final_costs(self.valley, x)
        if self.kind == "zero":
            return np.zeros(len(x))
        if self.kind == "dadp-sum":
            return sum(functions[t](x[:, [i]]) for i, functions in enumerate(self.value_functions))
        return self.value_functions[t](x)

    def continuation(self, t: int) -> Callable[[np.ndarray], np.ndarray]:
        """ Cost-to-go of the state reached at the end of stage t """
        def evaluate(points: np.ndarray) -> np.ndarray:
            return self.evaluate(t + 1, points)
        return evaluate
