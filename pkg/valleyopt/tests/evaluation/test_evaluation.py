import os

import networkx as nx
import pandas as pd
import pytest
from scipy.stats import linregress

from valleyopt.evaluation import GlobalValue, compare, generate_valley, prettify_compare_report, read_summary
from valleyopt.evaluation import simulate, write_report
from valleyopt.evaluation.benchmark import BENCH_COLUMNS, bench_scaling
from valleyopt.evaluation.compare import format_gap
from valleyopt.model.loader import valley_to_dict
from valleyopt.tests.config import price_spread_valley
from valleyopt.utils.data_models import SimReport

QUICK_SETTINGS = {"dadp": {"n_knots": 5, "max_iterations": 2, "gradient_samples": 20},
                  "dp": {"n_knots": 3}}


def _report(method, payoff, bound=None, seconds=None):
    return SimReport(method=method, n_scenarios=2, payoffs=[payoff, payoff], mean_payoff=payoff, std_error=0.0,
                     quantiles=[[[1.0]], [[1.0]], [[1.0]]], dam_ids=[1], upper_bound_payoff=bound,
                     optimization_seconds=seconds, simulation_seconds=seconds)


def test_format_gap():
    assert format_gap(98.0, 100.0) == "-2.0%"
    assert format_gap(100.0, 100.0) == "0.0%"
    assert format_gap(None, 100.0) == "N.A."
    assert format_gap(1.0, 0.0) == "N.A."


def test_format_gap_keeps_the_reference_sign():
    # cost-like references are negative: the gap divides by the signed reference
    assert format_gap(-98.0, -100.0) == "-2.0%"
    assert format_gap(-102.0, -100.0) == "2.0%"


def test_compare_reference_and_missing_cells():
    table = compare([_report("dadp", 98.0, bound=101.0, seconds=1.0), _report("dp", 100.0, seconds=2.0),
                     _report("sddpd", 100.0)])
    assert table["gap"].tolist() == ["-2.0%", "0.0%", "0.0%"]
    assert table["upper_bound_payoff"].tolist() == [101.0, "N.A.", "N.A."]
    assert table["cpu_seconds"].tolist() == [2.0, 4.0, "N.A."]


def test_compare_explicit_reference():
    table = compare([_report("dadp", 98.0), _report("dp", 100.0)], reference="dadp")
    assert table["gap"].tolist() == ["0.0%", "2.0%"]
    with pytest.raises(ValueError, match="reference"):
        compare([_report("dadp", 98.0)], reference="dp")
    with pytest.raises(ValueError, match="nothing"):
        compare([])


def test_prettify_compare_report():
    table = compare([_report("dp", 100.0, seconds=1.0), _report("dadp", 98.0, bound=100.5)])
    markdown = prettify_compare_report(table, fmt="md")
    assert markdown.splitlines()[0].startswith("|")
    assert "-2.0%" in markdown and "N.A." in markdown
    csv = prettify_compare_report(table, fmt="csv")
    assert csv.splitlines()[0] == "method,achieved_payoff,std_error,upper_bound_payoff,gap,cpu_seconds"
    assert "100.00" in prettify_compare_report(table, fmt="text")
    with pytest.raises(ValueError, match="unknown format"):
        prettify_compare_report(table, fmt="html")


def test_write_and_read_report(tmp_path):
    valley = price_spread_valley()
    report = simulate(valley, GlobalValue.zero(valley), n_scenarios=4, workers=1, method="myopic")
    path = str(tmp_path / "myopic.csv")
    write_report(report, path, bins=3, omit_timing=True)
    for name in ("payoffs", "histogram", "quantiles"):
        assert os.path.exists(str(tmp_path / f"myopic.{name}.csv"))
    row = read_summary(path)
    assert row["method"] == "myopic"
    assert row["mean_payoff"] == pytest.approx(report.mean_payoff)
    assert row["upper_bound_payoff"] is None
    assert "simulation_seconds" not in row
    assert len(pd.read_csv(str(tmp_path / "myopic.payoffs.csv"))) == 4
    table = compare([row])
    assert table["cpu_seconds"].tolist() == ["N.A."]


def test_rerun_is_byte_identical(tmp_path):
    valley = price_spread_valley()
    paths = []
    for k in range(2):
        report = simulate(valley, GlobalValue.zero(valley), n_scenarios=4, rng_seed=2, workers=1)
        paths.append(str(tmp_path / f"run{k}.csv"))
        write_report(report, paths[-1], omit_timing=True)
    with open(paths[0], "rb") as a, open(paths[1], "rb") as b:
        assert a.read() == b.read()


def test_generate_chain():
    valley = generate_valley("chain", 4, seed=1)
    assert valley.topology.parent == (1, 2, 3, None)
    assert [dam.id for dam in valley.dams] == [1, 2, 3, 4]
    assert valley.horizon == 6
    assert valley.name == "chain-4-academic-1"
    assert list(valley.u_max) == sorted(valley.u_max)
    single = generate_valley("chain", 1)
    assert single.topology.parent == (None,)


def test_generate_tree():
    valley = generate_valley("tree", 6, seed=0)
    assert nx.is_tree(valley.topology.graph.to_undirected())
    assert max(len(children) for children in valley.topology.children) == 2
    assert valley.topology.outlets == (0,)


def test_generate_realistic_profile():
    valley = generate_valley("chain", 4, profile="realistic")
    assert max(valley.x_max) / min(valley.x_max) == pytest.approx(10.0)
    assert valley.x_max[0] == max(valley.x_max)


def test_generate_is_seeded():
    first, second = generate_valley("chain", 3, seed=4), generate_valley("chain", 3, seed=4)
    assert valley_to_dict(first) == valley_to_dict(second)


def test_generate_rejects_bad_input():
    with pytest.raises(ValueError, match="shape"):
        generate_valley("ring", 3)
    with pytest.raises(ValueError, match="profile"):
        generate_valley("chain", 3, profile="huge")
    with pytest.raises(ValueError):
        generate_valley("chain", 0)


def test_bench_scaling():
    table = bench_scaling(dam_counts=(2, 3), solvers=("dadp",), horizon=2, settings=QUICK_SETTINGS)
    assert list(table.columns) == BENCH_COLUMNS
    assert table["status"].tolist() == ["ok", "ok"]
    assert (table["seconds"] > 0).all()


def test_scaling_shape():
    # a fixed number of multiplier updates keeps the work per dam constant
    dadp = bench_scaling(dam_counts=(4, 8, 12), solvers=("dadp",),
                         settings={"dadp": {"exact": True, "optimizer": "fixed", "max_iterations": 60,
                                            "tolerance": 1e-12}})
    assert dadp["status"].tolist() == ["ok", "ok", "ok"]
    fit = linregress(dadp["n_dams"].to_numpy(dtype=float), dadp["seconds"].to_numpy(dtype=float))
    assert fit.rvalue ** 2 >= 0.9
    dp = bench_scaling(dam_counts=(1, 2, 3), solvers=("dp",), settings={"dp": {"n_knots": 21}})
    assert dp["status"].tolist() == ["ok", "ok", "ok"]
    t = dp["seconds"].to_numpy(dtype=float)
    assert t[2] / t[1] > t[1] / t[0]


def test_bench_timeout_and_budget():
    table = bench_scaling(dam_counts=(2,), solvers=("dp",), horizon=2, timeout=1e-4, settings=QUICK_SETTINGS)
    assert table["status"].tolist() == ["timeout"]
    budget = bench_scaling(dam_counts=(2,), solvers=("dp",), horizon=2, settings={"dp": {"n_knots": 3,
                                                                                         "budget": 1}})
    assert budget["status"].tolist() == ["budget"]
    with pytest.raises(ValueError, match="unknown solvers"):
        bench_scaling(solvers=("milp",))
