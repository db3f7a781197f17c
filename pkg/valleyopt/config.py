import os

WORKERS = int(os.getenv("VALLEYOPT_WORKERS", "1"))
KNOTS = int(os.getenv("VALLEYOPT_KNOTS", "51"))
CUT_CAPACITY = int(os.getenv("VALLEYOPT_CUT_CAPACITY", "100"))
MAX_PRODUCT_ATOMS = int(os.getenv("VALLEYOPT_MAX_PRODUCT_ATOMS", "256"))
ENUMERATION_BUDGET = int(float(os.getenv("VALLEYOPT_ENUMERATION_BUDGET", "1e6")))
DP_BUDGET = int(float(os.getenv("VALLEYOPT_DP_BUDGET", "5e8")))
VALUE_FLOOR = float(os.getenv("VALLEYOPT_VALUE_FLOOR", "0.0"))
BOX_TOLERANCE = float(os.getenv("VALLEYOPT_BOX_TOLERANCE", "1e-9"))
MAX_Z_LEVELS = int(os.getenv("VALLEYOPT_MAX_Z_LEVELS", "64"))

# probabilities of a stage must sum to one within this tolerance
PROBABILITY_TOLERANCE = 1e-12
