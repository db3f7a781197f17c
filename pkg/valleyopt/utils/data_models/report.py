import math
from typing import List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

QUANTILE_LEVELS = (0.05, 0.5, 0.95)


class SimReport(BaseModel):
    """ Outcome of simulating a policy over Monte Carlo scenarios, payoffs are opposite costs """
    model_config = ConfigDict(frozen=True)

    method: str = "policy"
    n_scenarios: int = Field(ge=1)
    payoffs: List[float]
    mean_payoff: float
    std_error: float = Field(ge=0)
    # quantiles[q][t][i]: level QUANTILE_LEVELS[q] of the volume of dam i at time t
    quantiles: List[List[List[float]]]
    dam_ids: List[int]
    violations: int = Field(default=0, ge=0)
    fallback_steps: int = Field(default=0, ge=0)
    simulation_seconds: Optional[float] = None
    optimization_seconds: Optional[float] = None
    upper_bound_payoff: Optional[float] = None

    @model_validator(mode="after")
    def check_payoffs(self) -> "SimReport":
        errors = []
        if len(self.payoffs) != self.n_scenarios:
            errors.append(f"{len(self.payoffs)} payoffs for {self.n_scenarios} scenarios")
        if not all(math.isfinite(payoff) for payoff in self.payoffs):
            errors.append("non-finite payoffs")
        if errors:
            raise ValueError("; ".join(errors))
        return self

    def histogram(self, bins: int = 50) -> pd.DataFrame:
        """ Payoff histogram, one row per bin """
        counts, edges = np.histogram(np.asarray(self.payoffs), bins=bins)
        return pd.DataFrame({"bin_left": edges[:-1], "bin_right": edges[1:], "count": counts})

    def quantile_frame(self) -> pd.DataFrame:
        """ Volume quantiles in long format: one row per (time, dam) """
        q = np.asarray(self.quantiles)
        horizon, n_dams = q.shape[1], q.shape[2]
        frame = pd.DataFrame({"t": np.repeat(np.arange(horizon), n_dams), "dam": np.tile(self.dam_ids, horizon)})
        for k, level in enumerate(QUANTILE_LEVELS):
            frame[f"q{round(level * 100):02d}"] = q[k].ravel()
        return frame
