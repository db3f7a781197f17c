import math
import os
from typing import Any, Dict, List, Optional, Sequence, Union

import pandas as pd
from prettytable import MARKDOWN, PrettyTable

from valleyopt.utils.data_models import SimReport

SUMMARY_COLUMNS = ["method", "n_scenarios", "mean_payoff", "std_error", "upper_bound_payoff",
                   "optimization_seconds", "simulation_seconds", "violations", "fallback_steps"]
TIMING_COLUMNS = ["optimization_seconds", "simulation_seconds"]
COMPARE_COLUMNS = ["method", "achieved_payoff", "std_error", "upper_bound_payoff", "gap", "cpu_seconds"]
MISSING = "N.A."


def _sidecar(path: str, name: str) -> str:
    root, ext = os.path.splitext(path)
    return f"{root}.{name}{ext or '.csv'}"


def summary_frame(report: SimReport, omit_timing: bool = False) -> pd.DataFrame:
    row = {column: getattr(report, column) for column in SUMMARY_COLUMNS}
    frame = pd.DataFrame([row], columns=SUMMARY_COLUMNS)
    return frame.drop(columns=TIMING_COLUMNS) if omit_timing else frame


def write_report(report: SimReport, path: str, bins: int = 50, omit_timing: bool = False):
    """
    Write the summary row to ``path`` and the payoffs, histogram and volume quantiles next to it
    :param report: The simulation report
    :param path: Summary CSV path, sidecars are named ``<stem>.payoffs.csv`` and so on
    :param bins: Number of histogram bins
    :param omit_timing: Drop wall-time columns so that reruns are byte-identical
    """
    summary_frame(report, omit_timing).to_csv(path, index=False, encoding="utf-8")
    pd.DataFrame({"scenario": range(report.n_scenarios), "payoff": report.payoffs}).to_csv(
        _sidecar(path, "payoffs"), index=False, encoding="utf-8")
    report.histogram(bins).to_csv(_sidecar(path, "histogram"), index=False, encoding="utf-8")
    report.quantile_frame().to_csv(_sidecar(path, "quantiles"), index=False, encoding="utf-8")


def read_summary(path: str) -> Dict[str, Any]:
    """ Summary row of a report CSV, missing values as None """
    frame = pd.read_csv(path, encoding="utf-8")
    if len(frame) != 1:
        raise ValueError(f"{path}: expected one summary row, found {len(frame)}")
    row = frame.iloc[0].to_dict()
    return {key: (None if isinstance(value, float) and math.isnan(value) else value) for key, value in row.items()}


def format_gap(value: Optional[float], reference: Optional[float]) -> str:
    """ Relative gap ``(value - reference) / reference`` in percent with one decimal """
    if value is None or reference is None or reference == 0:
        return MISSING
    return f"{100.0 * (value - reference) / reference:.1f}%"


def compare(reports: Sequence[Union[SimReport, Dict[str, Any]]], reference: Optional[str] = None) -> pd.DataFrame:
    """
    Tabulate achieved payoffs, upper bounds on payoff, gaps to a reference and CPU times
    :param reports: Simulation reports or summary rows
    :param reference: Method of the reference row, ``dp`` when present, the first row otherwise
    :return: one row per report, missing entries rendered as ``N.A.``
    """
    if not reports:
        raise ValueError("nothing to compare")
    rows: List[Dict[str, Any]] = [report.model_dump() if isinstance(report, SimReport) else dict(report)
                                  for report in reports]
    methods = [row["method"] for row in rows]
    if reference is None:
        reference = "dp" if "dp" in methods else methods[0]
    if reference not in methods:
        raise ValueError(f"reference {reference} not among {methods}")
    reference_value = rows[methods.index(reference)]["mean_payoff"]

    table = []
    for row in rows:
        seconds = [row.get(column) for column in TIMING_COLUMNS]
        bound = row.get("upper_bound_payoff")
        table.append({
            "method": row["method"],
            "achieved_payoff": row["mean_payoff"],
            "std_error": row["std_error"],
            "upper_bound_payoff": MISSING if bound is None else bound,
            "gap": format_gap(row["mean_payoff"], reference_value),
            "cpu_seconds": MISSING if any(s is None for s in seconds) else sum(seconds),
        })
    return pd.DataFrame(table, columns=COMPARE_COLUMNS)


def prettify_compare_report(table: pd.DataFrame, fmt: str = "md", decimals: int = 2) -> str:
    """
    Convert a comparison table to a formatted string
    :param table: Output of :func:`compare`
    :param fmt: ``md`` for markdown, ``csv`` or ``text``
    :param decimals: Number of decimals of the numeric cells
    :return: the rendered table
    """
    pretty = PrettyTable()
    pretty.field_names = list(table.columns)
    for row in table.itertuples(index=False):
        pretty.add_row([f"{cell:.{decimals}f}" if isinstance(cell, float) else cell for cell in row])
    if fmt == "csv":
        return pretty.get_csv_string(lineterminator="\n")
    if fmt == "md":
        pretty.set_style(MARKDOWN)
    elif fmt != "text":
        raise ValueError(f"unknown format {fmt}")
    return pretty.get_string()
