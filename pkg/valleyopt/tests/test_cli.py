import json
import os

import pandas as pd
import pytest

from valleyopt.cli import EXIT_BUDGET, EXIT_INVALID, EXIT_OK, build_parser, main
from valleyopt.model import load_valley
from valleyopt.solver import SolverResult
from valleyopt.tests.config import BAD_PROBABILITIES_FILE, FOUR_DAM_CHAIN_FILE, ONE_DAM_FILE

COMMON = ["--workers", "1"]


def test_generate(tmp_path):
    out = str(tmp_path / "valley.json")
    assert main(["generate", "--shape", "tree", "--dams", "3", "--horizon", "2", "--out", out] + COMMON) == EXIT_OK
    valley = load_valley(out)
    assert valley.n_dams == 3
    assert valley.horizon == 2


def test_solve_dp_outputs(tmp_path):
    out = str(tmp_path / "dp")
    assert main(["solve", "dp", "--valley", ONE_DAM_FILE, "--knots", "11", "--out", out] + COMMON) == EXIT_OK
    for name in ("config.json", "value_functions.pkl", "log.csv"):
        assert os.path.exists(os.path.join(out, name))
    with open(os.path.join(out, "config.json"), encoding="utf-8") as f:
        config = json.load(f)
    assert config["method"] == "dp"
    assert config["estimate"] == pytest.approx(-5.0)
    assert SolverResult.from_disk(out).value_functions[0]([5.0]) == pytest.approx(-5.0)


def test_solve_dadp_writes_multipliers(tmp_path):
    out = str(tmp_path / "dadp")
    code = main(["solve", "dadp", "--valley", FOUR_DAM_CHAIN_FILE, "--knots", "9", "--iters", "2",
                 "--samples", "exact", "--smoothing", "0.5", "--out", out, "--omit-timing"] + COMMON)
    assert code == EXIT_OK
    multipliers = pd.read_csv(os.path.join(out, "multipliers.csv"))
    assert multipliers.columns[0] == "iteration"
    assert "t1:3->4" in multipliers.columns
    log = pd.read_csv(os.path.join(out, "log.csv"))
    assert "seconds" not in log.columns
    assert log["update"].iloc[0] == "initial"


def test_solve_simulate_compare(tmp_path):
    dp_dir, sddp_dir = str(tmp_path / "dp"), str(tmp_path / "sddp")
    assert main(["solve", "dp", "--valley", FOUR_DAM_CHAIN_FILE, "--knots", "9", "--out", dp_dir] + COMMON) == 0
    assert main(["solve", "sddpd", "--valley", FOUR_DAM_CHAIN_FILE, "--knots", "9", "--iters", "2", "--batch",
                 "2", "--out", sddp_dir] + COMMON) == 0
    reports = []
    for name, vf in (("dp", dp_dir), ("sddpd", sddp_dir), ("myopic", None)):
        out = str(tmp_path / f"{name}.csv")
        argv = ["simulate", "--valley", FOUR_DAM_CHAIN_FILE, "--n", "50", "--out", out] + COMMON
        if vf is not None:
            argv += ["--vf", vf]
        assert main(argv) == EXIT_OK
        reports.append(out)
    table = str(tmp_path / "compare.md")
    assert main(["compare", "--reports"] + reports + ["--format", "md", "--out", table]) == EXIT_OK
    with open(table, encoding="utf-8") as f:
        text = f.read()
    assert "myopic" in text and "sddpd" in text
    assert "0.0%" in text


def test_simulate_rerun_is_byte_identical(tmp_path):
    outputs = []
    for k in range(2):
        out = str(tmp_path / f"run{k}.csv")
        assert main(["simulate", "--valley", FOUR_DAM_CHAIN_FILE, "--n", "30", "--seed", "3", "--omit-timing",
                     "--out", out] + COMMON) == EXIT_OK
        outputs.append(out)
    for suffix in ("", ".payoffs", ".histogram", ".quantiles"):
        paths = [path.replace(".csv", f"{suffix}.csv") for path in outputs]
        with open(paths[0], "rb") as a, open(paths[1], "rb") as b:
            assert a.read() == b.read()


def test_invalid_instance_exit_code(tmp_path):
    code = main(["solve", "dp", "--valley", BAD_PROBABILITIES_FILE, "--out", str(tmp_path / "x")] + COMMON)
    assert code == EXIT_INVALID
    code = main(["simulate", "--valley", str(tmp_path / "missing.json"), "--out", str(tmp_path / "y.csv")] + COMMON)
    assert code == EXIT_INVALID


def test_bench_timeout_exit_code(tmp_path):
    out = str(tmp_path / "bench.csv")
    code = main(["bench", "--dams", "2", "--solvers", "dp", "--horizon", "2", "--timeout", "0.0001",
                 "--out", out] + COMMON)
    assert code == EXIT_BUDGET
    assert pd.read_csv(out)["status"].tolist() == ["timeout"]


def test_parser_rejects_bad_samples():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["solve", "dadp", "--valley", "v.json", "--out", "o", "--samples", "0"])
