import logging
import multiprocessing as mp
import time
from typing import Any, Dict, Optional, Sequence

import pandas as pd

from valleyopt.evaluation.dataset import generate_valley
from valleyopt.solver import SOLVERS, DadpConfig, DpConfig, SddpConfig
from valleyopt.utils.data_models import Valley
from valleyopt.utils.exceptions import BudgetExceededError

CONFIGS = {"dp": DpConfig, "sddpd": SddpConfig, "dadp": DadpConfig}
# desk-scale settings, the optimization stage only
BENCH_SETTINGS = {
    "dp": {"n_knots": 11},
    "sddpd": {"n_iterations": 10, "forward_batch": 4, "n_knots": 11},
    "dadp": {"n_knots": 11, "gradient_samples": 200, "max_iterations": 50},
}
BENCH_COLUMNS = ["shape", "n_dams", "solver", "seconds", "status"]


def _timed_solve(valley: Valley, method: str, settings: Dict[str, Any]) -> float:
    solver = SOLVERS[method](CONFIGS[method](**settings), workers=1)
    start = time.perf_counter()
    solver.solve(valley)
    return time.perf_counter() - start


def bench_scaling(shapes: Sequence[str] = ("chain",), dam_counts: Sequence[int] = (4, 8, 12),
                  solvers: Sequence[str] = ("dadp",), timeout: Optional[float] = None, seed: int = 0,
                  profile: str = "academic", horizon: int = 6, n_atoms: int = 2,
                  settings: Optional[Dict[str, Dict[str, Any]]] = None) -> pd.DataFrame:
    """
    Time the optimization stage of each solver on generated valleys of growing size
    :param shapes: Valley shapes
    :param dam_counts: Numbers of dams
    :param solvers: Solver names among ``dp``, ``sddpd`` and ``dadp``
    :param timeout: Seconds allowed per run, None for no limit
    :param seed: Generator seed
    :param profile: Generator size profile
    :param horizon: Number of stages
    :param n_atoms: Atoms per stage
    :param settings: Per-solver configuration overrides
    :return: one row per run with its wall time and status (``ok``, ``timeout`` or ``budget``)
    """
    unknown = sorted(set(solvers) - set(SOLVERS))
    if unknown:
        raise ValueError(f"unknown solvers {unknown}, expected among {sorted(SOLVERS)}")
    merged = {method: {**BENCH_SETTINGS[method], **(settings or {}).get(method, {})} for method in SOLVERS}
    rows = []
    for shape in shapes:
        for n_dams in dam_counts:
            valley = generate_valley(shape, n_dams, seed=seed, profile=profile, horizon=horizon, n_atoms=n_atoms)
            for method in solvers:
                seconds, status = None, "ok"
                pool = mp.Pool(processes=1)
                try:
                    seconds = pool.apply_async(_timed_solve, (valley, method, merged[method])).get(timeout)
                except mp.TimeoutError:
                    status = "timeout"
                except BudgetExceededError as e:
                    status = "budget"
                    logging.warning(f"{method} on {shape}-{n_dams}: {e}")
                finally:
                    pool.terminate()
                    pool.join()
                logging.info(f"bench {method} on {shape} valley of {n_dams} dams: {status} {seconds}")
                rows.append({"shape": shape, "n_dams": n_dams, "solver": method, "seconds": seconds,
                             "status": status})
    return pd.DataFrame(rows, columns=BENCH_COLUMNS)
