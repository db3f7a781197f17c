from valleyopt.evaluation.dataset.generator import generate_valley  # noqa: F401
