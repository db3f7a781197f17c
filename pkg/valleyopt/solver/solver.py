import json
import os
import pickle as pkl
from abc import ABC, abstractmethod
from typing import Any, Dict, List, Optional

import pandas as pd

from valleyopt.config import WORKERS
from valleyopt.utils.data_models import Valley


class SolverResult:
    """
    Output of an optimization stage: the value functions a policy can be built from, plus the bound
    or estimate the method provides and its logs
    """

    def __init__(self, method: str, value_functions: List[Any], horizon: int, n_dams: int,
                 bound: Optional[float] = None, estimate: Optional[float] = None, seconds: float = 0.0,
                 log: Optional[pd.DataFrame] = None, converged: bool = True, status: str = "done",
                 tables: Optional[Dict[str, pd.DataFrame]] = None):
        """
        :param method: Solver name, one of ``dp``, ``sddpd`` or ``dadp``
        :param value_functions: Per-stage value functions (dp, sddpd) or per-dam lists of them (dadp)
        :param horizon: Number of stages
        :param n_dams: Number of dams
        :param bound: Guaranteed bound on the optimal cost, if any
        :param estimate: Non guaranteed estimate of the optimal cost, if any
        :param seconds: Wall time of the optimization stage
        :param log: Per-stage or per-iteration log
        :param converged: Whether the stopping test was met
        :param status: Why the method stopped
        :param tables: Additional named tables to export
        """
        self.method = method
        self.value_functions = value_functions
        self.horizon = horizon
        self.n_dams = n_dams
        self.bound = bound
        self.estimate = estimate
        self.seconds = seconds
        self.log = log if log is not None else pd.DataFrame()
        self.converged = converged
        self.status = status
        self.tables = tables or {}

    @staticmethod
    def _get_serialize_file(path):
        return os.path.join(path, "value_functions.pkl")

    @staticmethod
    def _get_config_file(path):
        return os.path.join(path, "config.json")

    def config(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "horizon": self.horizon,
            "n_dams": self.n_dams,
            "bound": self.bound,
            "estimate": self.estimate,
            "seconds": self.seconds,
            "converged": self.converged,
            "status": self.status,
        }

    def to_disk(self, path):
        os.makedirs(path, exist_ok=True)
        with open(self._get_config_file(path), "w", encoding="utf-8") as f:
            json.dump(self.config(), f, indent=2)
        with open(self._get_serialize_file(path), "wb") as f:
            pkl.dump(self.value_functions, f)

    @classmethod
    def from_disk(cls, path) -> "SolverResult":
        with open(cls._get_config_file(path), encoding="utf-8") as f:
            config = json.load(f)
        with open(cls._get_serialize_file(path), "rb") as f:
            value_functions = pkl.load(f)
        return cls(value_functions=value_functions, **config)


class Solver(ABC):
    """
    Solver defines a standard interface for the optimization stage: from a valley, compute approximate
    Bellman functions that a one-step policy can use online
    """
    method: str = None

    def __init__(self, workers: Optional[int] = None, progress: bool = False):
        """
        :param workers: Number of processes for the parallel phases
        :param progress: Show progress bars
        """
        self.workers = WORKERS if workers is None else workers
        self.progress = progress

    @abstractmethod
    def solve(self, valley: Valley) -> SolverResult:
        """
        Run the optimization stage
        :param valley: The valley
        :return: The value functions and the bound or estimate of the method
        """
        pass
