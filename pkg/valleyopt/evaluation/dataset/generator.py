import math
from typing import Any, Dict, List, Literal, Optional

import networkx as nx
import numpy as np

from valleyopt.model.loader import valley_from_dict
from valleyopt.utils.data_models import Valley, ValleyTopology

Shape = Literal["chain", "tree"]
Profile = Literal["academic", "realistic"]


def _parents(shape: str, n_dams: int) -> List[Optional[int]]:
    if shape == "chain":
        return [i + 1 if i + 1 < n_dams else None for i in range(n_dams)]
    if shape == "tree":
        # binary heap rooted at the outlet
        return [None] + [(k - 1) // 2 for k in range(1, n_dams)]
    raise ValueError(f"unknown valley shape {shape}, expected chain or tree")


def seasonal_prices(horizon: int, base: float = 10.0, amplitude: float = 5.0) -> List[float]:
    return [float(round(base + amplitude * math.cos(2 * math.pi * t / horizon))) for t in range(horizon)]


def generate_valley(shape: Shape = "chain", n_dams: int = 4, seed: int = 0, profile: Profile = "academic",
                    horizon: int = 6, n_atoms: int = 2) -> Valley:
    """
    Desk-scale valley with integer data. Turbine capacity grows downstream and inflows shrink downstream.
    Storage capacities are uniform in the academic profile; the realistic profile spans a 10:1 range with the
    largest reservoirs upstream.
    :param shape: ``chain`` (dam i flows into dam i+1) or ``tree`` (binary tree rooted at the outlet)
    :param n_dams: Number of dams
    :param seed: Seed of the inflow atoms
    :param profile: ``academic`` or ``realistic``
    :param horizon: Number of stages
    :param n_atoms: Equiprobable joint inflow atoms per stage
    :return: the valley
    """
    if n_dams < 1:
        raise ValueError(f"a valley needs at least one dam, got {n_dams}")
    if profile not in ("academic", "realistic"):
        raise ValueError(f"unknown size profile {profile}, expected academic or realistic")
    if horizon < 1 or n_atoms < 1:
        raise ValueError(f"horizon and atom count must be positive, got {horizon} and {n_atoms}")
    parents = _parents(shape, n_dams)
    topology = ValleyTopology(n_dams=n_dams, parent=tuple(parents))
    upstream = [len(nx.ancestors(topology.graph, i)) for i in range(n_dams)]
    depth = [len(nx.descendants(topology.graph, i)) for i in range(n_dams)]
    max_depth = max(depth)
    rng = np.random.default_rng(seed)

    dams: List[Dict[str, Any]] = []
    for i in range(n_dams):
        if profile == "academic":
            x_max = 10.0
        else:
            x_max = float(round(5 * 10 ** (depth[i] / max_depth if max_depth else 1.0)))
        u_max = float(2 + upstream[i])
        x0 = float(x_max // 2)
        dams.append({
            "id": i + 1, "x_min": 0.0, "x_max": x_max, "u_min": 0.0, "u_max": u_max, "x_target": x0,
            "penalty_a": 1.0, "epsilon": 0.0, "control_levels": [float(u) for u in range(int(u_max) + 1)],
            "x0": x0, "parent": None if parents[i] is None else parents[i] + 1,
        })
    base = np.array([1 + depth[i] if profile == "academic" else max(1, round(dams[i]["x_max"] / 5))
                     for i in range(n_dams)])
    probabilities = [1.0 / n_atoms] * (n_atoms - 1)
    probabilities.append(1.0 - math.fsum(probabilities))
    prices = seasonal_prices(horizon)
    noise = []
    for t in range(horizon):
        atoms = []
        for k in range(n_atoms):
            inflows = rng.integers(0, 2 * base + 1)
            atoms.append({"p": probabilities[k], "inflows": [float(a) for a in inflows],
                          "prices": [prices[t]] * n_dams})
        noise.append({"atoms": atoms})
    data = {"horizon": horizon, "dams": dams, "noise": noise}
    return valley_from_dict(data, name=f"{shape}-{n_dams}-{profile}-{seed}")
