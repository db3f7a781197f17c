from valleyopt.utils.data_models.dam import Dam  # noqa: F401
from valleyopt.utils.data_models.noise import Atom, NoiseProcess, StageNoise  # noqa: F401
from valleyopt.utils.data_models.topology import ValleyTopology  # noqa: F401
from valleyopt.utils.data_models.transition import StageTransition  # noqa: F401
from valleyopt.utils.data_models.valley import Valley  # noqa: F401
from valleyopt.utils.data_models.report import SimReport  # noqa: F401
