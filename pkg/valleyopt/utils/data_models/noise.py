import math
from functools import cached_property
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from valleyopt.config import PROBABILITY_TOLERANCE


class Atom(BaseModel):
    """ One joint realization of inflows and prices at a stage """
    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    p: float = Field(gt=0)
    inflows: Tuple[float, ...]
    prices: Tuple[float, ...]

    @model_validator(mode="after")
    def check_atom(self) -> "Atom":
        errors = []
        if len(self.inflows) != len(self.prices):
            errors.append(f"{len(self.inflows)} inflows but {len(self.prices)} prices")
        negative = [a for a in self.inflows if a < 0]
        if negative:
            errors.append(f"negative inflows {negative}")
        if errors:
            raise ValueError("; ".join(errors))
        return self


class StageNoise(BaseModel):
    model_config = ConfigDict(frozen=True)

    atoms: Tuple[Atom, ...] = Field(min_length=1)

    @model_validator(mode="after")
    def check_distribution(self) -> "StageNoise":
        errors = []
        total = math.fsum(atom.p for atom in self.atoms)
        if abs(total - 1.0) > PROBABILITY_TOLERANCE:
            errors.append(f"probabilities sum to {total!r}, expected 1")
        if len({len(atom.inflows) for atom in self.atoms}) > 1:
            errors.append("atoms of different dimensions")
        if errors:
            raise ValueError("; ".join(errors))
        return self

    @cached_property
    def probabilities(self) -> np.ndarray:
        return np.array([atom.p for atom in self.atoms])

    @cached_property
    def inflows(self) -> np.ndarray:
        """ Array of shape (atoms, dams) """
        return np.array([atom.inflows for atom in self.atoms], dtype=float)

    @cached_property
    def prices(self) -> np.ndarray:
        """ Array of shape (atoms, dams) """
        return np.array([atom.prices for atom in self.atoms], dtype=float)

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)


class NoiseProcess(BaseModel):
    """ Stagewise independent finite-support noise. Stage ``t`` atoms are drawn independently of other stages. """
    model_config = ConfigDict(frozen=True)

    stages: Tuple[StageNoise, ...] = Field(min_length=1)

    @property
    def horizon(self) -> int:
        return len(self.stages)

    @property
    def dim(self) -> int:
        return len(self.stages[0].atoms[0].inflows)

    @model_validator(mode="after")
    def check_dimensions(self) -> "NoiseProcess":
        dims = sorted({len(stage.atoms[0].inflows) for stage in self.stages})
        if len(dims) > 1:
            raise ValueError(f"stages have different dimensions {dims}")
        return self

    @classmethod
    def deterministic(cls, inflows: List[List[float]], prices: List[List[float]]) -> "NoiseProcess":
        """ One atom per stage """
        return cls(stages=tuple(StageNoise(atoms=(Atom(p=1.0, inflows=tuple(a), prices=tuple(p)),))
                                for a, p in zip(inflows, prices)))
