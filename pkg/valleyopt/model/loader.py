import itertools
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Union

from valleyopt.config import MAX_PRODUCT_ATOMS
from valleyopt.utils.data_models import Valley
from valleyopt.utils.exceptions import ValleyParseError

DAM_KEYS = ("id", "x_min", "x_max", "u_min", "u_max", "x_target", "penalty_a", "epsilon", "control_levels", "x0",
            "parent")
TOP_LEVEL_KEYS = ("horizon", "dams", "noise")


def _product_of_marginals(t: int, marginals: List[List[Dict[str, Any]]], max_atoms: int) -> List[Dict[str, Any]]:
    size = math.prod(len(m) for m in marginals)
    if size > max_atoms:
        raise ValleyParseError(f"noise[{t}].marginals: product has {size} atoms, cap is {max_atoms}")
    atoms = []
    for combination in itertools.product(*marginals):
        atoms.append({
            "p": math.prod(item["p"] for item in combination),
            "inflows": [item["inflow"] for item in combination],
            "prices": [item["price"] for item in combination],
        })
    return atoms


def valley_from_dict(data: Dict[str, Any], expand_marginals: bool = False,
                     max_product_atoms: int = MAX_PRODUCT_ATOMS, name: str = None) -> Valley:
    """ Build a valley from the decoded instance document

    :param data: The decoded JSON document
    :param expand_marginals: Accept per-dam independent marginals and materialize their product
    :param max_product_atoms: Cap on the number of atoms produced by a product of marginals
    :param name: Optional valley name
    :return: The validated valley
    """
    missing = [key for key in TOP_LEVEL_KEYS if key not in data]
    if missing:
        raise ValleyParseError(f"missing top-level keys {missing}")
    horizon = data["horizon"]
    if not isinstance(horizon, int) or isinstance(horizon, bool) or horizon < 1:
        raise ValleyParseError(f"horizon: expected a positive integer, got {horizon!r}")
    dams = data["dams"]
    if not isinstance(dams, list) or not dams:
        raise ValleyParseError("dams: expected a non-empty array")
    for k, dam in enumerate(dams):
        absent = [key for key in DAM_KEYS if key not in dam and key not in ("penalty_a", "epsilon")]
        if absent:
            raise ValleyParseError(f"dams[{k}]: missing keys {absent}")
    index = {dam["id"]: k for k, dam in enumerate(dams)}
    parents = []
    for k, dam in enumerate(dams):
        parent = dam["parent"]
        if parent is not None and parent not in index:
            raise ValleyParseError(f"dams[{k}].parent: unknown dam id {parent!r}")
        parents.append(None if parent is None else index[parent])

    stages = data["noise"]
    if not isinstance(stages, list) or len(stages) != horizon:
        raise ValleyParseError(f"noise: expected {horizon} stage objects, "
                               f"got {len(stages) if isinstance(stages, list) else type(stages).__name__}")
    noise_stages = []
    for t, stage in enumerate(stages):
        if "atoms" in stage:
            noise_stages.append({"atoms": stage["atoms"]})
        elif "marginals" in stage:
            if not expand_marginals:
                raise ValleyParseError(f"noise[{t}]: per-dam marginals given but product expansion is disabled")
            noise_stages.append({"atoms": _product_of_marginals(t, stage["marginals"], max_product_atoms)})
        else:
            raise ValleyParseError(f"noise[{t}]: expected key 'atoms' or 'marginals'")

    return Valley.model_validate({
        "name": name if name is not None else data.get("name"),
        "topology": {"n_dams": len(dams), "parent": parents},
        "dams": [{key: value for key, value in dam.items() if key != "parent"} for dam in dams],
        "noise": {"stages": noise_stages},
    })


def load_valley(path: Union[str, Path], expand_marginals: bool = False,
                max_product_atoms: int = MAX_PRODUCT_ATOMS) -> Valley:
    """ Load and validate a valley instance file

    :param path: Path to the JSON instance
    :param expand_marginals: Accept per-dam independent marginals and materialize their product
    :param max_product_atoms: Cap on the product size
    :return: The valley
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")

    def reject_constant(token: str):
        offset = text.find(token)
        line = text.count("\n", 0, offset) + 1 if offset >= 0 else None
        raise ValleyParseError(f"non-finite number {token} is not allowed", str(path), line)

    try:
        data = json.loads(text, parse_constant=reject_constant)
    except json.JSONDecodeError as e:
        raise ValleyParseError(e.msg, str(path), e.lineno, e.colno) from e
    if not isinstance(data, dict):
        raise ValleyParseError("expected a JSON object at top level", str(path), 1)
    try:
        return valley_from_dict(data, expand_marginals=expand_marginals, max_product_atoms=max_product_atoms,
                                name=data.get("name", path.stem))
    except ValleyParseError as e:
        raise ValleyParseError(str(e), str(path)) from e


def valley_to_dict(valley: Valley) -> Dict[str, Any]:
    parents = valley.topology.parent
    return {
        "name": valley.name,
        "horizon": valley.horizon,
        "dams": [
            {
                "id": dam.id, "x_min": dam.x_min, "x_max": dam.x_max, "u_min": dam.u_min, "u_max": dam.u_max,
                "x_target": dam.x_target, "penalty_a": dam.penalty_a, "epsilon": dam.epsilon,
                "control_levels": list(dam.control_levels), "x0": dam.x0,
                "parent": None if parents[i] is None else valley.dams[parents[i]].id,
            }
            for i, dam in enumerate(valley.dams)
        ],
        "noise": [
            {"atoms": [{"p": atom.p, "inflows": list(atom.inflows), "prices": list(atom.prices)}
                       for atom in stage.atoms]}
            for stage in valley.noise.stages
        ],
    }


def write_valley(valley: Valley, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        json.dump(valley_to_dict(valley), f, indent=2)
        f.write("\n")
    return path
