"""Rendering of results: fixed-width text tables and JSON documents.

Tables show coefficients over "(standard error)" rows with significance
stars at the 10/5/1% levels, followed by the footer block: sample sizes,
CD, joint component significance, homogeneity statistics, the regime
loading-sum test, explained-variance shares, the three R-squared rows and
the estimated factor count.  Cross-section-average and intercept
coefficients are estimated but not tabulated; they stay in the JSON
documents.
"""

from __future__ import annotations

import json
import math
from typing import Sequence

import numpy as np
import pandas as pd

from .diagnostics import DeltaResult, TestReport
from .factors import FactorSet
from .pipeline import (
    BenchmarkColumn,
    BenchmarkResult,
    NumFacReport,
    PipelineResult,
    SkippedTest,
)
from .regress import ROLE_CONST, ROLE_CSA, FitResult

LABEL_WIDTH = 30
CELL_WIDTH = 14


def stars(p: float) -> str:
    if not math.isfinite(p):
        return ""
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.1:
        return "*"
    return ""


def jsonify(obj):
    """Recursively convert to plain JSON-safe Python types."""
    if isinstance(obj, dict):
        return {str(k): jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def to_json(document: dict) -> str:
    return json.dumps(jsonify(document), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# JSON documents
# ---------------------------------------------------------------------------

def test_to_dict(report: TestReport) -> dict:
    return {"name": report.name, "statistic": report.statistic,
            "p_value": report.p_value,
            "null": report.null_description,
            "inputs": dict(report.inputs), "details": dict(report.details)}


def delta_to_dict(result: DeltaResult) -> dict:
    return {"delta": result.delta, "p_delta": result.p_delta,
            "delta_adj": result.delta_adj, "p_delta_adj": result.p_delta_adj,
            "s_tilde": result.s_tilde, "k": result.k,
            "inputs": dict(result.inputs), "tested": list(result.tested)}


def tests_to_dict(tests: dict) -> dict:
    out = {}
    for key, value in tests.items():
        if isinstance(value, SkippedTest):
            out[key] = {"skipped": value.reason}
        elif isinstance(value, DeltaResult):
            out[key] = delta_to_dict(value)
        else:
            out[key] = test_to_dict(value)
    return out


def fit_to_dict(result: FitResult) -> dict:
    doc = {
        "estimator": result.estimator_label,
        "columns": list(result.columns),
        "roles": list(result.roles),
        "coefficients": result.coefficient_table(),
        "sample": {"countries": result.sample.n_countries,
                   "periods": result.sample.n_periods,
                   "obs": result.sample.n_obs},
        "r2": result.r2, "r2_mg": result.r2_mg, "r2_within": result.r2_within,
        "metadata": dict(result.metadata),
    }
    if result.per_unit is not None:
        doc["per_unit"] = {
            country: {"coefficients": unit.coefficients,
                      "r_squared": unit.r_squared,
                      "dropped": [result.columns[j] for j in unit.dropped]}
            for country, unit in result.per_unit.items()}
    if result.mg is not None:
        doc["mg"] = {"mean": result.mg.mean, "se": result.mg.se,
                     "t": result.mg.t_stat, "p": result.mg.p_value,
                     "n_units": result.mg.n_units}
    if result.pooled is not None:
        doc["pooled"] = {"coefficients": result.pooled.coefficients,
                         "se": result.pooled.se, "t": result.pooled.t_stat,
                         "p": result.pooled.p_value,
                         "n_clusters": result.pooled.n_clusters}
    return doc


def factorset_to_dict(factorset: FactorSet) -> dict:
    return {"n_components": factorset.n_components,
            "eigenvalues": factorset.eigenvalues,
            "shares": factorset.shares,
            "sign_anchor": list(factorset.sign_anchor)}


def numfac_to_dict(numfac: NumFacReport) -> dict:
    def count_dict(c):
        return {"k_er": c.k_er, "k_gr": c.k_gr, "er": c.er, "gr": c.gr,
                "kmax": c.kmax, "truncated": c.truncated}

    return {"k_dependent": numfac.k_dependent, "k_composite": numfac.k_composite,
            "kmax": numfac.kmax, "dependent": count_dict(numfac.dependent),
            "composite": count_dict(numfac.composite)}


def pipeline_to_dict(result: PipelineResult) -> dict:
    return {
        "step1": fit_to_dict(result.step1),
        "step3": fit_to_dict(result.step3),
        "numfac": numfac_to_dict(result.numfac),
        "factorset": factorset_to_dict(result.factorset),
        "n_components": result.n_components,
        "tests": tests_to_dict(result.tests),
        "warnings": list(result.warnings),
        "provenance": result.provenance,
    }


def residuals_frame(result: FitResult) -> pd.DataFrame:
    from .paneldata import format_period

    rows = []
    for i, country in enumerate(result.countries):
        for j, period in enumerate(result.periods):
            rows.append((country, format_period(period), result.residuals[i, j]))
    return pd.DataFrame(rows, columns=["country", "period", "residual"])


def components_frame(factorset: FactorSet, periods: Sequence[int]) -> pd.DataFrame:
    from .paneldata import format_period

    if len(periods) != factorset.components.shape[0]:
        raise ValueError("periods length must match the component window")
    data = {"period": [format_period(p) for p in periods]}
    for k in range(factorset.n_components):
        data[f"pc{k + 1}"] = factorset.components[:, k]
    return pd.DataFrame(data)


# ---------------------------------------------------------------------------
# fixed-width tables
# ---------------------------------------------------------------------------

def _cell(text: str) -> str:
    return f"{text:>{CELL_WIDTH}}"


def _num(value: float, decimals: int = 3) -> str:
    if value is None or not math.isfinite(value):
        return _cell("")
    return _cell(f"{value:.{decimals}f}")


def _row(label: str, cells: list[str]) -> str:
    return f"{label:<{LABEL_WIDTH}}" + "".join(cells)


def _collect_labels(columns: Sequence[BenchmarkColumn]) -> list[str]:
    seen: list[str] = []
    for col in columns:
        for label, role in zip(col.fit.columns, col.fit.roles):
            if role in (ROLE_CSA, ROLE_CONST):
                continue
            if label not in seen:
                seen.append(label)
    return seen


def render_table(columns: Sequence[BenchmarkColumn],
                 numfac: NumFacReport | None = None,
                 factorset: FactorSet | None = None) -> str:
    """Fixed-width comparison table with the full footer block."""
    lines: list[str] = []
    width = LABEL_WIDTH + CELL_WIDTH * len(columns)
    rule = "-" * width
    lines.append(_row("", [_cell(c.label) for c in columns]))
    lines.append(_row("", [_cell(c.estimator) for c in columns]))
    lines.append(rule)

    per_column = []
    for col in columns:
        table = {row["label"]: row for row in col.fit.coefficient_table()}
        per_column.append(table)
    for label in _collect_labels(columns):
        est_cells, se_cells = [], []
        for table in per_column:
            row = table.get(label)
            if row is None or not math.isfinite(row["estimate"]):
                est_cells.append(_cell(""))
                se_cells.append(_cell(""))
            else:
                est_cells.append(_num(row["estimate"]))
                if math.isfinite(row["se"]):
                    se_cells.append(_cell(f"({row['se']:.3f}){stars(row['p'])}"))
                else:
                    se_cells.append(_cell(""))
        lines.append(_row(label, est_cells))
        lines.append(_row("", se_cells))
    lines.append(rule)

    sample = columns[0].fit.sample
    lines.append(_row("Obs", [_cell(str(c.fit.sample.n_obs)) for c in columns]))
    lines.append(_row("Countries", [_cell(str(c.fit.sample.n_countries)) for c in columns]))
    lines.append(_row("Time Periods", [_cell(str(c.fit.sample.n_periods)) for c in columns]))
    lines.append(rule)

    def test_rows(label: str, key: str, attr_stat, attr_p):
        stat_cells, p_cells = [], []
        for col in columns:
            entry = col.tests.get(key)
            if entry is None or isinstance(entry, SkippedTest):
                stat_cells.append(_cell(""))
                p_cells.append(_cell(""))
            else:
                stat_cells.append(_num(attr_stat(entry)))
                p_cells.append(_num(attr_p(entry)))
        lines.append(_row(label, stat_cells))
        lines.append(_row("  p", p_cells))

    test_rows("CD", "cd", lambda e: e.statistic, lambda e: e.p_value)
    lines.append(rule)
    test_rows("F: PC = 0", "f_pc", lambda e: e.statistic, lambda e: e.p_value)
    test_rows("Delta (all)", "delta_all", lambda e: e.delta, lambda e: e.p_delta)
    test_rows("Delta (PC)", "delta_pc", lambda e: e.delta, lambda e: e.p_delta)
    test_rows("t: PC F1 > PC F0", "loading_sum",
              lambda e: e.statistic, lambda e: e.p_value)
    lines.append(rule)

    if factorset is not None:
        share_cells = [_num(float(factorset.shares.sum()))] + [_cell("")] * (len(columns) - 1)
        lines.append(_row("Share PC (all)", share_cells))
        for k in range(factorset.n_components):
            cells = [_num(float(factorset.shares[k]))] + [_cell("")] * (len(columns) - 1)
            lines.append(_row(f"  PC {k + 1}", cells))
        lines.append(rule)

    lines.append(_row("R2", [_num(c.fit.r2) for c in columns]))
    lines.append(_row("R2 (MG)", [
        _num(c.fit.r2_mg) if c.fit.r2_mg is not None else _cell("") for c in columns]))
    lines.append(_row("R2 (within)", [_num(c.fit.r2_within) for c in columns]))
    lines.append(rule)

    if numfac is not None:
        cells = [_cell(str(numfac.k_composite))] + [_cell("")] * (len(columns) - 1)
        lines.append(_row("Factors in u_hat", cells))
        lines.append(rule)

    lines.append("Standard errors in parentheses; * p<0.10, ** p<0.05, *** p<0.01")
    return "\n".join(lines) + "\n"


def render_fit(result: FitResult, tests: dict | None = None) -> str:
    column = BenchmarkColumn(label="(1)", estimator=result.estimator_label,
                             fit=result, tests=tests or {})
    return render_table([column])


def render_pipeline(result: PipelineResult) -> str:
    step1_tests = {"cd": result.tests["cd_step1"]}
    step3_tests = {"cd": result.tests["cd_step3"],
                   "delta_all": result.tests["delta_all"],
                   "delta_pc": result.tests["delta_pc"],
                   "f_pc": result.tests["f_pc"]}
    if "loading_sum" in result.tests:
        step3_tests["loading_sum"] = result.tests["loading_sum"]
    columns = [
        BenchmarkColumn(label="(1)", estimator=result.step1.estimator_label,
                        fit=result.step1, tests=step1_tests),
        BenchmarkColumn(label="(2)", estimator="PC-MG",
                        fit=result.step3, tests=step3_tests),
    ]
    return render_table(columns, numfac=result.numfac, factorset=result.factorset)


def render_benchmarks(result: BenchmarkResult) -> str:
    return render_table(list(result.columns), numfac=result.numfac,
                        factorset=result.factorset)


def render_mc_summary(report) -> str:
    lines = [f"Monte Carlo: {report.completed}/{report.reps} replications "
             f"({report.wall_clock:.1f}s)", ""]
    if report.estimators:
        lines.append(_row("bias / rmse", []))
        for name, coefs in sorted(report.estimators.items()):
            for label, entry in sorted(coefs.items()):
                lines.append(_row(f"{name}: {label}",
                                  [_num(entry['bias'], 4), _num(entry['rmse'], 4)]))
        lines.append("")
    for family, block in (("CD rejection", report.cd), ("tests", report.tests)):
        if block:
            lines.append(family)
            for key, entry in sorted(block.items()):
                cells = [_num(entry["rejection"]["rate"], 3),
                         _num(entry["mean_stat"], 3)]
                lines.append(_row(f"  {key} (rate, mean stat)", cells))
            lines.append("")
    if report.factor_counts:
        lines.append("factor-count hit rates")
        for key, entry in sorted(report.factor_counts.items()):
            value = entry["hit_rate"] if isinstance(entry, dict) else entry
            lines.append(_row(f"  {key}", [_num(value, 3)]))
        lines.append("")
    return "\n".join(lines) + "\n"
