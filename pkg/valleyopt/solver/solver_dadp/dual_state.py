import logging
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from valleyopt.config import KNOTS, MAX_Z_LEVELS, WORKERS
from valleyopt.model.dynamics import FEASIBILITY_SLACK, spill_and_next
from valleyopt.utils.data_models import Valley

# outflows closer than this are one level
LEVEL_DECIMALS = 9
# smoothing temperature as a share of the mean absolute price
SMOOTHING_SHARE = 0.1


class DualState(BaseModel):
    """ Expected multipliers of the flow couplings, one column per link (dam with a downstream dam) """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    multipliers: np.ndarray
    gradient: np.ndarray
    dual_value: float = 0.0
    iteration: int = 0
    links: Tuple[int, ...]

    @model_validator(mode="after")
    def check_arrays(self) -> "DualState":
        errors = []
        if self.multipliers.ndim != 2 or self.multipliers.shape[1] != len(self.links):
            errors.append(f"multipliers of shape {self.multipliers.shape} for {len(self.links)} links")
        if self.gradient.shape != self.multipliers.shape:
            errors.append(f"gradient of shape {self.gradient.shape}, multipliers of shape {self.multipliers.shape}")
        if not np.all(np.isfinite(self.multipliers)) or not np.all(np.isfinite(self.gradient)):
            errors.append("non-finite entries")
        if errors:
            raise ValueError("; ".join(errors))
        return self

    @classmethod
    def zeros(cls, valley: Valley) -> "DualState":
        links = valley.topology.links
        shape = (valley.horizon, len(links))
        return cls(multipliers=np.zeros(shape), gradient=np.zeros(shape), links=links)


class DadpConfig(BaseModel):
    """ Settings of the price decomposition solver """
    model_config = ConfigDict(frozen=True)

    z_levels: Optional[Dict[int, List[float]]] = None
    max_z_levels: int = Field(default=MAX_Z_LEVELS, ge=2)
    gradient_samples: int = Field(default=1000, ge=1)
    exact: bool = False
    max_iterations: int = Field(default=300, ge=0)
    tolerance: Optional[float] = Field(default=None, gt=0)
    confidence: float = Field(default=3.0, ge=0)
    smoothing: Optional[float] = Field(default=None, ge=0)
    optimizer: Literal["lbfgs", "fixed"] = "lbfgs"
    step: Union[float, List[float]] = 1e-2
    initial_step: float = Field(default=1.0, gt=0)
    memory: int = Field(default=10, ge=1)
    max_line_search: int = Field(default=20, ge=1)
    n_knots: int = Field(default=KNOTS, ge=2)
    knots: Optional[List[List[float]]] = None
    rng_seed: int = 0
    workers: int = Field(default=WORKERS, ge=1)
    progress: bool = False

    @model_validator(mode="after")
    def check_levels(self) -> "DadpConfig":
        errors = []
        for link, levels in (self.z_levels or {}).items():
            if not levels:
                errors.append(f"z_levels[{link}] is empty")
            elif any(not np.isfinite(z) or z < 0 for z in levels):
                errors.append(f"z_levels[{link}] must be finite and nonnegative")
            elif any(b <= a for a, b in zip(levels, levels[1:])):
                errors.append(f"z_levels[{link}] not strictly increasing")
        steps = self.step if isinstance(self.step, list) else [self.step]
        if not steps or any(not rho > 0 for rho in steps):
            errors.append(f"step sizes must be positive, got {self.step}")
        if errors:
            raise ValueError("; ".join(errors))
        return self

    def tolerance_for(self, valley: Valley) -> float:
        """ Gradient tolerance, by default a thousandth of the mean dam capacity """
        if self.tolerance is not None:
            return self.tolerance
        return 1e-3 * float(np.mean(valley.x_max - valley.x_min))

    def smoothing_for(self, valley: Valley) -> float:
        """ Temperature of the smoothed subproblem minimum, by default a tenth of the mean absolute price """
        if self.smoothing is not None:
            return self.smoothing
        prices = np.concatenate([np.abs(stage.prices).ravel() for stage in valley.noise.stages])
        return SMOOTHING_SHARE * float(prices.mean())

    def steps_for(self, valley: Valley) -> np.ndarray:
        """ Step size per stage """
        if isinstance(self.step, list):
            if len(self.step) != valley.horizon:
                raise ValueError(f"{len(self.step)} step sizes for horizon {valley.horizon}")
            return np.asarray(self.step, dtype=float)
        return np.full(valley.horizon, float(self.step))


def default_z_levels(valley: Valley, knots: Sequence[Sequence[float]], max_levels: int = MAX_Z_LEVELS,
                     given: Optional[Dict[int, Sequence[float]]] = None) -> Dict[int, np.ndarray]:
    """
    Outflows every upstream dam can release in its subproblem: turbine level plus spill, over the dam's knots,
    its inflow values, its admissible turbine levels and the sums of its children's levels. With these levels
    every outflow of the gridded problem is representable and the decomposition is a relaxation of it.
    A set larger than ``max_levels`` is replaced by evenly spaced levels between its extremes.
    :param valley: The valley
    :param knots: Knot vector per dam
    :param max_levels: Maximal number of levels per link
    :param given: Levels set by the caller, used as they are
    :return: increasing levels per link
    """
    given = given or {}
    topology = valley.topology
    levels: Dict[int, np.ndarray] = {}
    for i in topology.order:
        if topology.parent[i] is None:
            continue
        if i in given:
            levels[i] = np.asarray(given[i], dtype=float)
            continue
        dam = valley.dams[i]
        z = np.zeros(1)
        for c in topology.children[i]:
            z = np.unique(np.round(z[:, None] + levels[c][None, :], LEVEL_DECIMALS))
        a = np.unique(np.concatenate([stage.inflows[:, i] for stage in valley.noise.stages]))
        x = np.asarray(knots[i], dtype=float)[:, None, None, None]
        u, a, z = dam.levels[None, :, None, None], a[None, None, :, None], z[None, None, None, :]
        feasible = u <= np.minimum(dam.u_max, x + a + z - dam.x_min) + FEASIBILITY_SLACK
        _, spill = spill_and_next(x, u, a, z, dam.x_min, dam.x_max)
        outflow = np.broadcast_to(u + spill, feasible.shape)[feasible]
        candidates = np.unique(np.round(outflow, LEVEL_DECIMALS)) if outflow.size else np.zeros(1)
        if len(candidates) > max_levels:
            logging.warning(f"dam {dam.id} can release {len(candidates)} distinct outflows, keeping {max_levels} "
                            f"evenly spaced levels on [{candidates[0]:g}, {candidates[-1]:g}]: the dual value "
                            f"is no longer a guaranteed bound")
            candidates = np.linspace(candidates[0], candidates[-1], max_levels)
        levels[i] = candidates
    return levels


def resolve_z_levels(valley: Valley, config: DadpConfig, knots: Sequence[Sequence[float]]) -> Dict[int, np.ndarray]:
    """ z levels of every link, from the configuration when given """
    given = config.z_levels or {}
    unknown = sorted(set(given) - set(valley.topology.links))
    if unknown:
        raise ValueError(f"z_levels given for dams {unknown} which feed no other dam")
    return default_z_levels(valley, knots, config.max_z_levels, given)
