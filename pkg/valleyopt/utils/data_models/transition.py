from typing import Optional

from pydantic import BaseModel, ConfigDict


class StageTransition(BaseModel):
    """ Result of one dam step: next volume, spilled water and total outflow (turbined + spilled) """
    model_config = ConfigDict(frozen=True)

    x_next: float
    spill: float
    outflow: float
    stage_cost: Optional[float] = None
