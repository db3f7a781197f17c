from valleyopt.model.dynamics import (cascade, control_combinations, control_range, dam_step,  # noqa: F401
                                      final_cost, final_costs, stage_cost, stage_costs)
from valleyopt.model.loader import load_valley, valley_from_dict, valley_to_dict, write_valley  # noqa: F401
from valleyopt.model.sampling import sample_atom_indices, sample_scenario, spawn_seeds  # noqa: F401
