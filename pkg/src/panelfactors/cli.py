"""Command-line driver: estimate, pipeline, simulate, numfac, cd.

One JSON config file describes the run; command-line flags override file
values and the fully resolved configuration is embedded in every output
document (and written as ``resolved_config.json``), so any run can be
reproduced from its artifacts.  Exit codes: 0 success, 2 config/schema
error, 3 estimation failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import report
from .diagnostics import cd_test
from .errors import (
    BalanceError,
    ConfigurationError,
    DiagnosticsError,
    EstimationError,
    FactorError,
    IngestionError,
    MissingDataError,
    PanelFactorsError,
    PipelineHaltError,
    SchemaError,
    SpecificationError,
    TransformError,
)
from .factors import ahn_horenstein, default_kmax, eigen_spectrum
from .paneldata import CsvSchema, Panel, TransformSpec, apply_transforms, balance, load_csv
from .pipeline import PipelineOptions, run_benchmarks, run_three_step
from .regress import CsaSpec, ModelSpec, fit
from .simulate import PRESETS, DgpConfig, LoadingSpec, McSuite, RegimeConfig, run_monte_carlo

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ESTIMATION = 3
EXIT_IO = 4

_ALLOWED = {
    "": {"input", "transforms", "window", "model", "pipeline", "simulation",
         "reps", "suite", "variable", "output", "seed", "threads", "benchmarks"},
    "input": {"path", "schema"},
    "input.schema": {"country", "period", "variables", "common", "rename"},
    "model": {"dependent", "lag_dep", "regressors", "observed_cf", "cf_lags",
              "csa", "pcs", "regime_var", "estimator", "pooled_cce"},
    "model.csa": {"variables", "lags"},
    "pipeline": {"pcs", "kmax", "pc_source", "subtract_observed_cf",
                 "strict_cd", "cd_alpha"},
    "simulation": {"n_units", "n_periods", "burn_in", "m_ucf", "m_ocf",
                   "rho_mean", "rho_sd", "beta_mean", "beta_sd",
                   "gamma", "theta", "gamma_x", "theta_x", "xi_sd",
                   "noise_eps", "noise_chi", "noise_omega",
                   "factor_ar", "factor_scale", "regime", "seed"},
    "simulation.regime": {"fixed_share", "gamma_shift", "switch_prob"},
    "suite": {"estimators", "run_pipeline", "csa_lags", "cf_lags", "pcs",
              "kmax", "regime_split", "record_cd", "record_delta_on",
              "record_loading_sum", "record_factor_counts", "alpha"},
    "output": {"dir", "formats"},
}
_LOADING = {"mean", "sd"}


def _check_keys(node: dict, path: str):
    allowed = _ALLOWED.get(path)
    if allowed is None:
        return
    unknown = set(node) - allowed
    if unknown:
        where = path or "top level"
        raise SchemaError(f"unknown config keys at {where}: {sorted(unknown)}")
    for key, value in node.items():
        child = f"{path}.{key}" if path else key
        if isinstance(value, dict) and child in _ALLOWED:
            _check_keys(value, child)


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    text = Path(path).read_text()
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise SchemaError("config root must be a JSON object")
    _check_keys(config, "")
    input_path = config.get("input", {}).get("path")
    if input_path is not None and not Path(input_path).is_absolute():
        config["input"]["path"] = str((Path(path).parent / input_path).resolve())
    return config


def _loading(node, fallback=LoadingSpec()) -> LoadingSpec:
    if node is None:
        return fallback
    unknown = set(node) - _LOADING
    if unknown:
        raise SchemaError(f"unknown loading keys: {sorted(unknown)}")
    return LoadingSpec(mean=float(node.get("mean", 0.0)), sd=float(node.get("sd", 0.0)))


def build_schema(node: dict) -> CsvSchema:
    return CsvSchema(
        country=node.get("country", "country"),
        period=node.get("period", "period"),
        variables=tuple(node.get("variables", ())),
        common=tuple(node.get("common", ())),
        rename=dict(node.get("rename", {})))


def build_transforms(nodes) -> list[TransformSpec]:
    allowed = {"kind", "source", "target", "k", "replace"}
    specs = []
    for node in nodes or ():
        unknown = set(node) - allowed
        if unknown:
            raise SchemaError(f"unknown transform keys: {sorted(unknown)}")
        for key in ("kind", "source", "target"):
            if key not in node:
                raise SchemaError(f"transform entry is missing {key!r}")
        source = node["source"]
        if isinstance(source, list):
            source = tuple(source)
        specs.append(TransformSpec(
            kind=node["kind"], source=source, target=node["target"],
            k=int(node.get("k", 1)), replace=bool(node.get("replace", False))))
    return specs


def build_model(node: dict) -> ModelSpec:
    if "dependent" not in node:
        raise SchemaError("model.dependent is required")
    csa = None
    if node.get("csa") is not None:
        if "variables" not in node["csa"]:
            raise SchemaError("model.csa.variables is required")
        csa = CsaSpec(variables=tuple(node["csa"]["variables"]),
                      lags=int(node["csa"].get("lags", 0)))
    return ModelSpec(
        dependent=node["dependent"],
        lag_dep=int(node.get("lag_dep", 1)),
        regressors=tuple(node.get("regressors", ())),
        observed_cf=tuple(node.get("observed_cf", ())),
        cf_lags=int(node.get("cf_lags", 0)),
        csa=csa,
        pcs=node.get("pcs"),
        regime_var=node.get("regime_var"),
        estimator=node.get("estimator", "MG"),
        pooled_cce=bool(node.get("pooled_cce", False)))


def build_pipeline_options(node: dict) -> PipelineOptions:
    return PipelineOptions(
        pcs=node.get("pcs"),
        kmax=node.get("kmax"),
        pc_source=node.get("pc_source", "composite"),
        subtract_observed_cf=bool(node.get("subtract_observed_cf", False)),
        strict_cd=bool(node.get("strict_cd", False)),
        cd_alpha=float(node.get("cd_alpha", 0.01)))


def build_dgp(node: dict) -> DgpConfig:
    regime = node.get("regime") or {}
    kwargs = {k: node[k] for k in
              ("n_units", "n_periods", "burn_in", "m_ucf", "m_ocf", "rho_mean",
               "rho_sd", "beta_sd", "xi_sd", "noise_eps", "noise_chi",
               "noise_omega", "factor_ar", "seed") if k in node}
    if "beta_mean" in node:
        kwargs["beta_mean"] = tuple(node["beta_mean"])
    if "factor_scale" in node:
        fs = node["factor_scale"]
        kwargs["factor_scale"] = tuple(fs) if isinstance(fs, list) else float(fs)
    return DgpConfig(
        gamma=_loading(node.get("gamma"), DgpConfig.gamma),
        theta=_loading(node.get("theta"), DgpConfig.theta),
        gamma_x=_loading(node.get("gamma_x"), DgpConfig.gamma_x),
        theta_x=_loading(node.get("theta_x"), DgpConfig.theta_x),
        regime=RegimeConfig(
            fixed_share=float(regime.get("fixed_share", 0.0)),
            gamma_shift=float(regime.get("gamma_shift", 0.0)),
            switch_prob=float(regime.get("switch_prob", 0.0))),
        **kwargs)


def build_suite(node: dict) -> McSuite:
    kwargs = dict(node)
    for key in ("estimators", "record_cd"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    return McSuite(**kwargs)


def _model_variables(spec: ModelSpec) -> list[str]:
    names = [spec.dependent, *spec.regressors, *spec.observed_cf]
    if spec.csa is not None:
        names.extend(v for v in spec.csa.variables if v not in names)
    if spec.regime_var is not None:
        names.append(spec.regime_var)
    return names


def prepare_panel(config: dict, referenced: list[str]) -> Panel:
    node = config.get("input")
    if node is None:
        raise SchemaError("this command needs an 'input' section in the config")
    if "path" not in node:
        raise SchemaError("input.path is required")
    panel = load_csv(node["path"], build_schema(node.get("schema", {})))
    panel = apply_transforms(panel, build_transforms(config.get("transforms")))
    window = config.get("window")
    missing = [v for v in referenced if not panel.has_variable(v)]
    if missing:
        raise SchemaError(f"config references unknown variables: {missing}")
    return balance(panel, referenced, tuple(window) if window else None)


def _apply_overrides(config: dict, args) -> dict:
    config = copy.deepcopy(config)
    if getattr(args, "preset", None):
        if args.preset not in PRESETS:
            raise SchemaError(f"unknown preset {args.preset!r}; "
                              f"available: {sorted(PRESETS)}")
        dgp, suite = PRESETS[args.preset]()
        from dataclasses import asdict
        config.setdefault("simulation", asdict(dgp))
        config.setdefault("suite", asdict(suite))
    pipe = config.setdefault("pipeline", {})
    if getattr(args, "pcs", None) is not None:
        pipe["pcs"] = args.pcs
        config.setdefault("suite", {})["pcs"] = args.pcs
    if getattr(args, "kmax", None) is not None:
        pipe["kmax"] = args.kmax
    if getattr(args, "strict_cd", False):
        pipe["strict_cd"] = True
    if getattr(args, "csa_lags", None) is not None:
        model = config.get("model")
        if model and model.get("csa"):
            model["csa"]["lags"] = args.csa_lags
        config.setdefault("suite", {})["csa_lags"] = args.csa_lags
    if getattr(args, "cf_lags", None) is not None:
        if config.get("model"):
            config["model"]["cf_lags"] = args.cf_lags
        config.setdefault("suite", {})["cf_lags"] = args.cf_lags
    if getattr(args, "seed", None) is not None:
        if "simulation" in config:
            config["simulation"]["seed"] = args.seed
        config["seed"] = args.seed
    if getattr(args, "reps", None) is not None:
        config["reps"] = args.reps
    if getattr(args, "threads", None) is not None:
        config["threads"] = args.threads
    if getattr(args, "variable", None):
        config["variable"] = args.variable
    if getattr(args, "output", None):
        config.setdefault("output", {})["dir"] = args.output
    if getattr(args, "benchmarks", False):
        config["benchmarks"] = True
    return config


def _output_dir(config: dict) -> Path:
    out = Path(config.get("output", {}).get("dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str):
    path.write_text(text)


def _emit(args, human: str, document: dict):
    if args.json:
        sys.stdout.write(report.to_json(document))
    else:
        sys.stdout.write(human)


def _timing() -> dict:
    return {"created_at": time.strftime("%Y-%m-%dT%H:%M:%S")}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_estimate(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    if "model" not in config:
        raise SchemaError("estimate needs a 'model' section")
    if "simulation" in config:
        raise SchemaError("estimate takes 'input', not 'simulation'")
    spec = build_model(config["model"])
    panel = prepare_panel(config, _model_variables(spec))
    result = fit(spec, panel)
    tests = {"cd": cd_test(result.residuals, units=result.countries)}
    out = _output_dir(config)
    table = report.render_fit(result, tests)
    document = {"resolved_config": config, "fit": report.fit_to_dict(result),
                "tests": {"cd": report.test_to_dict(tests["cd"])},
                "timing": _timing()}
    _write(out / "table.txt", table)
    _write(out / "fit.json", report.to_json(document))
    report.residuals_frame(result).to_csv(out / "residuals.csv", index=False)
    _write(out / "resolved_config.json", report.to_json(config))
    _emit(args, table, document)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    if "model" not in config:
        raise SchemaError("pipeline needs a 'model' section")
    if "simulation" in config:
        raise SchemaError("pipeline takes 'input', not 'simulation'")
    spec = build_model(config["model"])
    options = build_pipeline_options(config.get("pipeline", {}))
    panel = prepare_panel(config, _model_variables(spec))
    out = _output_dir(config)
    if config.get("benchmarks"):
        bench = run_benchmarks(panel, spec, options)
        table = report.render_benchmarks(bench)
        document = {"resolved_config": config,
                    "columns": {c.label: report.fit_to_dict(c.fit) for c in bench.columns},
                    "tests": {c.label: report.tests_to_dict(c.tests) for c in bench.columns},
                    "numfac": report.numfac_to_dict(bench.numfac),
                    "factorset": report.factorset_to_dict(bench.factorset),
                    "timing": _timing()}
        factorset, periods = bench.factorset, bench.columns[0].fit.periods
        residuals = bench.columns[-1].fit
    else:
        run = run_three_step(panel, spec, options)
        table = report.render_pipeline(run)
        document = {"resolved_config": config, **report.pipeline_to_dict(run),
                    "timing": _timing()}
        factorset, periods = run.factorset, run.step3.periods
        residuals = run.step3
    _write(out / "table.txt", table)
    _write(out / "pipeline.json", report.to_json(document))
    report.components_frame(factorset, periods).to_csv(out / "pcs.csv", index=False)
    report.residuals_frame(residuals).to_csv(out / "residuals.csv", index=False)
    _write(out / "resolved_config.json", report.to_json(config))
    _emit(args, table, document)
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    if "simulation" not in config:
        raise SchemaError("simulate needs a 'simulation' section (or --preset)")
    if "input" in config:
        raise SchemaError("simulate takes 'simulation', not 'input'")
    dgp = build_dgp(config["simulation"])
    suite = build_suite(config.get("suite", {}))
    reps = int(config.get("reps", 100))
    threads = int(config.get("threads", 1))
    mc = run_monte_carlo(dgp, reps=reps, suite=suite, threads=threads,
                         master_seed=config.get("seed"))
    out = _output_dir(config)
    summary = report.render_mc_summary(mc)
    document = {"resolved_config": config, "report": mc.to_json_dict(),
                "timing": {**_timing(), "wall_clock": mc.wall_clock}}
    _write(out / "mc.json", report.to_json(document))
    _write(out / "mc_summary.txt", summary)
    _write(out / "resolved_config.json", report.to_json(config))
    _emit(args, summary, document)
    return EXIT_OK


def _variable_matrix(panel: Panel, variable) -> np.ndarray:
    names = variable if isinstance(variable, list) else [variable]
    if all(panel.has_variable(n) and panel.is_common(n) for n in names):
        return np.vstack([panel.get(n) for n in names])
    if len(names) == 1:
        return panel.get(names[0])
    raise SchemaError("pass one country-level variable or a list of common series")


def cmd_numfac(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    variable = config.get("variable")
    if not variable:
        raise SchemaError("numfac needs 'variable' (or --variable)")
    referenced = variable if isinstance(variable, list) else [variable]
    panel = prepare_panel(config, referenced)
    matrix = _variable_matrix(panel, variable)
    lam = eigen_spectrum(matrix)
    kmax = config.get("pipeline", {}).get("kmax") or default_kmax(*matrix.shape)
    kmax = min(kmax, lam.size - 2)
    count = ahn_horenstein(lam, kmax)
    document = {"resolved_config": config, "variable": variable,
                "k_er": count.k_er, "k_gr": count.k_gr,
                "er": count.er, "gr": count.gr, "kmax": count.kmax,
                "eigenvalues": lam[:kmax + 2]}
    human = (f"estimated number of common factors in {variable}\n"
             f"  GR selects k = {count.k_gr}\n"
             f"  ER selects k = {count.k_er}\n"
             f"  scanned k = 1..{count.kmax}\n")
    _emit(args, human, document)
    return EXIT_OK


def cmd_cd(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    variable = config.get("variable")
    if not variable:
        raise SchemaError("cd needs 'variable' (or --variable)")
    referenced = variable if isinstance(variable, list) else [variable]
    panel = prepare_panel(config, referenced)
    matrix = _variable_matrix(panel, variable)
    units = panel.countries if matrix.shape[0] == panel.n_countries else None
    result = cd_test(matrix, units=units)
    document = {"resolved_config": config, "variable": variable,
                **report.test_to_dict(result)}
    human = (f"CD test on {variable}: statistic {result.statistic:.3f}, "
             f"p = {result.p_value:.4f}\n")
    _emit(args, human, document)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser and entry point
# ---------------------------------------------------------------------------

def _add_shared(sub: argparse.ArgumentParser):
    sub.add_argument("--config", help="JSON run configuration")
    sub.add_argument("--output", help="output directory (default: out)")
    sub.add_argument("--seed", type=int, help="override the master seed")
    sub.add_argument("--threads", type=int, help="worker threads (0 = auto)")
    sub.add_argument("--json", action="store_true",
                     help="machine-parseable stdout instead of tables")
    sub.add_argument("--strict-cd", action="store_true", dest="strict_cd",
                     help="halt when step 1 leaves strong dependence")
    sub.add_argument("--pcs", type=int, help="override the component count")
    sub.add_argument("--kmax", type=int, help="override the factor-count scan range")
    sub.add_argument("--csa-lags", type=int, dest="csa_lags",
                     help="override cross-section average lags")
    sub.add_argument("--cf-lags", type=int, dest="cf_lags",
                     help="override observed-common-factor lags")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="panelfactors",
        description="CCE mean-group estimation with principal-component "
                    "augmentation, diagnostics, and Monte Carlo evaluation")
    commands = parser.add_subparsers(dest="command", required=True)

    est = commands.add_parser("estimate", help="fit one model specification")
    _add_shared(est)
    est.set_defaults(handler=cmd_estimate)

    pipe = commands.add_parser("pipeline", help="run the three-step procedure")
    _add_shared(pipe)
    pipe.add_argument("--benchmarks", action="store_true",
                      help="run the ten-column estimator family instead")
    pipe.set_defaults(handler=cmd_pipeline)

    sim = commands.add_parser("simulate", help="Monte Carlo evaluation")
    _add_shared(sim)
    sim.add_argument("--reps", type=int, help="number of replications")
    sim.add_argument("--preset", help=f"named scenario: {sorted(PRESETS)}")
    sim.set_defaults(handler=cmd_simulate)

    num = commands.add_parser("numfac", help="estimate the number of common factors")
    _add_shared(num)
    num.add_argument("--variable", action="append",
                     help="variable to analyze (repeat for a common-series set)")
    num.set_defaults(handler=cmd_numfac)

    cd = commands.add_parser("cd", help="cross-sectional dependence test")
    _add_shared(cd)
    cd.add_argument("--variable", action="append", help="variable to test")
    cd.set_defaults(handler=cmd_cd)
    return parser


def _normalize_variable(args):
    variable = getattr(args, "variable", None)
    if variable is not None and len(variable) == 1:
        args.variable = variable[0]


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _normalize_variable(args)
    try:
        return args.handler(args)
    except (SchemaError, ConfigurationError, IngestionError, TransformError,
            SpecificationError, BalanceError, MissingDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EstimationError, DiagnosticsError, FactorError,
            PipelineHaltError, PanelFactorsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
