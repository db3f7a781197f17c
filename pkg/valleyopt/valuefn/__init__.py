from valleyopt.valuefn.value_function import ValueFunction  # noqa: F401
from valleyopt.valuefn.grid import GridValueFunction, grid_nodes, make_knots, make_valley_knots  # noqa: F401
from valleyopt.valuefn.cut_pool import CutPool  # noqa: F401
