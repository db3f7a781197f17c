from functools import cached_property
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class Dam(BaseModel):
    """ Physical and economic parameters of one reservoir.

    Volumes are in hm3, flows in hm3 per stage, costs in currency units.
    """
    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    id: int
    x_min: float
    x_max: float
    u_min: float
    u_max: float
    x_target: float
    penalty_a: float = Field(default=0.0)
    epsilon: float = Field(default=0.0)
    control_levels: Tuple[float, ...]
    x0: float

    @model_validator(mode="after")
    def check_invariants(self) -> "Dam":
        errors = []
        if not self.x_min < self.x_max:
            errors.append(f"x_min={self.x_min} must be below x_max={self.x_max}")
        if not self.x_min <= self.x0 <= self.x_max:
            errors.append(f"x0={self.x0} outside [{self.x_min}, {self.x_max}]")
        if self.u_min > self.u_max:
            errors.append(f"u_min={self.u_min} > u_max={self.u_max}")
        if self.u_min < 0:
            errors.append(f"u_min={self.u_min} is negative (pumping is not modelled)")
        if len(self.control_levels) == 0:
            errors.append("control_levels is empty")
        if any(b <= a for a, b in zip(self.control_levels, self.control_levels[1:])):
            errors.append(f"control_levels {list(self.control_levels)} not strictly increasing")
        outside = [u for u in self.control_levels if not self.u_min <= u <= self.u_max]
        if outside:
            errors.append(f"control_levels {outside} outside [{self.u_min}, {self.u_max}]")
        if self.penalty_a < 0:
            errors.append(f"penalty_a={self.penalty_a} is negative")
        if self.epsilon < 0:
            errors.append(f"epsilon={self.epsilon} is negative")
        if errors:
            raise ValueError(f"dam {self.id}: " + "; ".join(errors))
        return self

    @cached_property
    def levels(self) -> np.ndarray:
        return np.asarray(self.control_levels, dtype=float)
