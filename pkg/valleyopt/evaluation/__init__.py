from valleyopt.evaluation.global_value import GlobalValue  # noqa: F401
from valleyopt.evaluation.policy import check_transition, coordinate_descent, one_step_policy  # noqa: F401
from valleyopt.evaluation.simulate import simulate  # noqa: F401
from valleyopt.evaluation.compare import (compare, prettify_compare_report, read_summary,  # noqa: F401
                                          write_report)
from valleyopt.evaluation.dataset import generate_valley  # noqa: F401
