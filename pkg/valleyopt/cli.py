import argparse
import logging
import os
import sys
from typing import List, Optional

from pydantic import ValidationError

from valleyopt import __version__
from valleyopt.config import CUT_CAPACITY, ENUMERATION_BUDGET, KNOTS
from valleyopt.evaluation import (GlobalValue, compare, generate_valley, prettify_compare_report, read_summary,
                                  simulate, write_report)
from valleyopt.evaluation.benchmark import bench_scaling
from valleyopt.model import load_valley, write_valley
from valleyopt.solver import SOLVERS, DadpConfig, DpConfig, SddpConfig, SolverResult
from valleyopt.utils.exceptions import BudgetExceededError

EXIT_OK, EXIT_INVALID, EXIT_BUDGET = 0, 2, 3


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                        help="Number of worker processes (default: logical cores)")
    common.add_argument("--format", choices=["csv", "md"], default="csv",
                        help="Format of tables printed on standard output")
    common.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="Logging level")
    common.add_argument("--progress", action="store_true", help="Show progress bars")
    return common


def _valley_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--valley", required=True, help="Valley instance JSON file")
    parser.add_argument("--marginals", action="store_true",
                        help="Accept per-dam noise marginals and expand their product")


def _samples(value: str):
    if value == "exact":
        return value
    samples = int(value)
    if samples < 1:
        raise argparse.ArgumentTypeError(f"expected a positive count or 'exact', got {value}")
    return samples


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="valleyopt", description="Stochastic optimal control of hydro valleys")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    generate = commands.add_parser("generate", parents=[common], help="Write a generated desk-scale valley")
    generate.add_argument("--shape", choices=["chain", "tree"], default="chain", help="Valley geometry")
    generate.add_argument("--dams", type=int, default=4, help="Number of dams")
    generate.add_argument("--seed", type=int, default=0, help="Generator seed")
    generate.add_argument("--profile", choices=["academic", "realistic"], default="academic",
                          help="Uniform capacities or a 10:1 range with large dams upstream")
    generate.add_argument("--horizon", type=int, default=6, help="Number of stages")
    generate.add_argument("--atoms", type=int, default=2, help="Noise atoms per stage")
    generate.add_argument("--out", required=True, help="Output JSON file")

    solve = commands.add_parser("solve", help="Run an optimization stage and save its value functions")
    methods = solve.add_subparsers(dest="method", required=True)
    dp = methods.add_parser("dp", parents=[common], help="Dynamic programming on the product grid")
    dp.add_argument("--knots", type=int, default=KNOTS, help="Knots per dam")
    sddpd = methods.add_parser("sddpd", parents=[common], help="Discrete-control SDDP")
    sddpd.add_argument("--knots", type=int, default=KNOTS, help="Knots per dam for finite differences")
    sddpd.add_argument("--iters", type=int, default=25, help="Number of iterations")
    sddpd.add_argument("--batch", type=int, default=8, help="Forward scenarios per iteration")
    sddpd.add_argument("--cuts", type=int, default=CUT_CAPACITY, help="Cuts kept per stage")
    sddpd.add_argument("--prune", action="store_true", help="Level-1 dominance pruning of the cut pools")
    sddpd.add_argument("--seed", type=int, default=0, help="Scenario seed")
    dadp = methods.add_parser("dadp", parents=[common], help="Dual approximate dynamic programming")
    dadp.add_argument("--knots", type=int, default=KNOTS, help="Knots per dam")
    dadp.add_argument("--iters", type=int, default=300, help="Maximal number of multiplier updates")
    dadp.add_argument("--tol", type=float, default=None, help="Tolerance on the expected coupling deviation")
    dadp.add_argument("--samples", type=_samples, default=1000, help="Monte Carlo scenarios, or 'exact'")
    dadp.add_argument("--optimizer", choices=["lbfgs", "fixed"], default="lbfgs", help="Multiplier update")
    dadp.add_argument("--step", type=float, default=1e-2, help="Step size of the fixed-step update")
    dadp.add_argument("--smoothing", type=float, default=None,
                      help="Temperature of the smoothed subproblems, 0 for exact ones")
    dadp.add_argument("--seed", type=int, default=0, help="Scenario seed")
    for method in (dp, sddpd, dadp):
        _valley_arguments(method)
        method.add_argument("--out", required=True, help="Output directory")
        method.add_argument("--omit-timing", action="store_true", help="Leave wall times out of the outputs")

    sim = commands.add_parser("simulate", parents=[common], help="Simulate the one-step policy of a solution")
    _valley_arguments(sim)
    sim.add_argument("--vf", default=None, help="Solution directory, omitted for the myopic policy")
    sim.add_argument("--n", type=int, default=100000, help="Number of scenarios")
    sim.add_argument("--seed", type=int, default=0, help="Scenario seed")
    sim.add_argument("--budget", type=int, default=ENUMERATION_BUDGET, help="Largest joint enumeration")
    sim.add_argument("--bins", type=int, default=50, help="Payoff histogram bins")
    sim.add_argument("--out", required=True, help="Summary CSV, sidecar CSVs are written next to it")
    sim.add_argument("--omit-timing", action="store_true", help="Leave wall times out of the outputs")

    comp = commands.add_parser("compare", parents=[common], help="Tabulate simulation reports")
    comp.add_argument("--reports", nargs="+", required=True, help="Summary CSVs written by simulate")
    comp.add_argument("--reference", default=None, help="Method of the reference row")
    comp.add_argument("--out", default=None, help="Output file, standard output when omitted")

    bench = commands.add_parser("bench", parents=[common], help="Time optimization stages on generated valleys")
    bench.add_argument("--shapes", nargs="+", default=["chain"], choices=["chain", "tree"], help="Valley shapes")
    bench.add_argument("--dams", nargs="+", type=int, default=[4, 8, 12], help="Numbers of dams")
    bench.add_argument("--solvers", nargs="+", default=["dadp"], choices=sorted(SOLVERS), help="Solvers")
    bench.add_argument("--timeout", type=float, default=None, help="Seconds allowed per run")
    bench.add_argument("--seed", type=int, default=0, help="Generator seed")
    bench.add_argument("--horizon", type=int, default=6, help="Number of stages")
    bench.add_argument("--out", required=True, help="Output CSV")
    return parser


def _solver_config(args):
    if args.method == "dp":
        return DpConfig(n_knots=args.knots, workers=args.workers, progress=args.progress)
    if args.method == "sddpd":
        return SddpConfig(n_knots=args.knots, n_iterations=args.iters, forward_batch=args.batch,
                          cut_capacity=args.cuts, prune=args.prune, rng_seed=args.seed, workers=args.workers,
                          progress=args.progress)
    return DadpConfig(n_knots=args.knots, max_iterations=args.iters, tolerance=args.tol,
                      gradient_samples=1 if args.samples == "exact" else args.samples,
                      exact=args.samples == "exact", optimizer=args.optimizer, step=args.step,
                      smoothing=args.smoothing, rng_seed=args.seed, workers=args.workers, progress=args.progress)


def _emit(text: str, out: Optional[str]):
    if out is None:
        print(text)
    else:
        with open(out, "w", encoding="utf-8") as f:
            f.write(text if text.endswith("\n") else text + "\n")


def run(args) -> int:
    if args.command == "generate":
        valley = generate_valley(args.shape, args.dams, seed=args.seed, profile=args.profile, horizon=args.horizon,
                                 n_atoms=args.atoms)
        write_valley(valley, args.out)
        return EXIT_OK

    if args.command == "solve":
        valley = load_valley(args.valley, expand_marginals=args.marginals)
        solver = SOLVERS[args.method](_solver_config(args), workers=args.workers, progress=args.progress)
        result = solver.solve(valley)
        if args.omit_timing:
            result.seconds = None
        result.to_disk(args.out)
        tables = {"log": result.log, **result.tables}
        for name, table in tables.items():
            if args.omit_timing:
                table = table.drop(columns=["seconds"], errors="ignore")
            table.to_csv(os.path.join(args.out, f"{name}.csv"), index=False, encoding="utf-8")
        return EXIT_OK

    if args.command == "simulate":
        valley = load_valley(args.valley, expand_marginals=args.marginals)
        if args.vf is None:
            global_value, method, seconds, bound = GlobalValue.zero(valley), "myopic", None, None
        else:
            result = SolverResult.from_disk(args.vf)
            global_value, method, seconds = GlobalValue.from_solution(result, valley), result.method, result.seconds
            bound = None if result.bound is None else -result.bound
        report = simulate(valley, global_value, n_scenarios=args.n, rng_seed=args.seed, workers=args.workers,
                          budget=args.budget, method=method, optimization_seconds=seconds, upper_bound_payoff=bound,
                          progress=args.progress)
        write_report(report, args.out, bins=args.bins, omit_timing=args.omit_timing)
        return EXIT_OK

    if args.command == "compare":
        table = compare([read_summary(path) for path in args.reports], reference=args.reference)
        _emit(prettify_compare_report(table, fmt=args.format), args.out)
        return EXIT_OK

    table = bench_scaling(args.shapes, args.dams, args.solvers, timeout=args.timeout, seed=args.seed,
                          horizon=args.horizon)
    table.to_csv(args.out, index=False, encoding="utf-8")
    return EXIT_BUDGET if (table["status"] != "ok").any() else EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level, logging.WARNING),
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        return run(args)
    except BudgetExceededError as e:
        logging.error(str(e))
        return EXIT_BUDGET
    except (ValidationError, ValueError, OSError) as e:
        logging.error(str(e))
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
