"""Heterogeneous dynamic panels under cross-sectional dependence.

Library layout mirrors the estimation workflow: ``paneldata`` holds the
container and transforms, ``regress`` the estimator family, ``factors``
the eigen-analysis, ``diagnostics`` the test battery, ``pipeline`` the
three-step procedure and benchmark table, ``simulate`` the Monte Carlo
harness, and ``cli`` the command-line front end.
"""

__version__ = "0.1.0"

from .diagnostics import TestReport, cd_test, delta_test, loading_sum_test, mg_wald_test
from .factors import FactorSet, ahn_horenstein, count_factors, eigen_spectrum, extract_pcs
from .paneldata import (
    CsvSchema,
    Panel,
    TransformSpec,
    apply_transform,
    apply_transforms,
    balance,
    cross_section_averages,
    format_period,
    interpolate_linear,
    load_csv,
    parse_period,
)
from .pipeline import (
    BenchmarkResult,
    PipelineOptions,
    PipelineResult,
    dissect_pcs,
    run_benchmarks,
    run_three_step,
)
from .regress import (
    CsaSpec,
    FitResult,
    ModelSpec,
    build_design,
    composite_residuals,
    demean,
    fit,
    ols,
)
from .simulate import DgpConfig, LoadingSpec, McSuite, RegimeConfig, gen_dgp, run_monte_carlo

__all__ = [
    "__version__",
    "CsvSchema", "Panel", "TransformSpec", "apply_transform", "apply_transforms",
    "balance", "cross_section_averages", "format_period", "interpolate_linear",
    "load_csv", "parse_period",
    "CsaSpec", "ModelSpec", "FitResult", "build_design", "composite_residuals",
    "demean", "fit", "ols",
    "FactorSet", "ahn_horenstein", "count_factors", "eigen_spectrum", "extract_pcs",
    "TestReport", "cd_test", "delta_test", "loading_sum_test", "mg_wald_test",
    "PipelineOptions", "PipelineResult", "BenchmarkResult",
    "run_three_step", "run_benchmarks", "dissect_pcs",
    "DgpConfig", "LoadingSpec", "RegimeConfig", "McSuite", "gen_dgp", "run_monte_carlo",
]
