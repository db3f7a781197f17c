from functools import cached_property
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from valleyopt.utils.data_models.dam import Dam
from valleyopt.utils.data_models.noise import NoiseProcess
from valleyopt.utils.data_models.topology import ValleyTopology


class Valley(BaseModel):
    """ A complete problem instance: geometry, dams and noise process """
    model_config = ConfigDict(frozen=True)

    topology: ValleyTopology
    dams: Tuple[Dam, ...]
    noise: NoiseProcess
    name: Optional[str] = None

    @model_validator(mode="after")
    def check_consistency(self) -> "Valley":
        errors = []
        if len(self.dams) != self.topology.n_dams:
            errors.append(f"{len(self.dams)} dams for a topology of {self.topology.n_dams}")
        if self.noise.dim != len(self.dams):
            errors.append(f"noise vectors have dimension {self.noise.dim}, expected {len(self.dams)}")
        ids = [dam.id for dam in self.dams]
        if len(set(ids)) != len(ids):
            errors.append(f"duplicate dam ids {ids}")
        if errors:
            raise ValueError("; ".join(errors))
        return self

    @property
    def n_dams(self) -> int:
        return len(self.dams)

    @property
    def horizon(self) -> int:
        return self.noise.horizon

    def _column(self, name: str) -> np.ndarray:
        return np.array([getattr(dam, name) for dam in self.dams], dtype=float)

    @cached_property
    def x_min(self) -> np.ndarray:
        return self._column("x_min")

    @cached_property
    def x_max(self) -> np.ndarray:
        return self._column("x_max")

    @cached_property
    def u_max(self) -> np.ndarray:
        return self._column("u_max")

    @cached_property
    def x0(self) -> np.ndarray:
        return self._column("x0")

    @cached_property
    def x_target(self) -> np.ndarray:
        return self._column("x_target")

    @cached_property
    def penalty_a(self) -> np.ndarray:
        return self._column("penalty_a")

    @cached_property
    def epsilon(self) -> np.ndarray:
        return self._column("epsilon")
