"""Three-step estimation pipeline and the benchmark estimator family.

Step 1 fits the CSA-augmented mean-group regression with the observed
global series included directly.  Step 2 extracts the composite error
(dependent variable net of estimated dynamics and unit-specific regressor
effects), counts its factors, and pulls principal components.  Step 3
refits the mean-group regression with the components replacing every
common-factor proxy, optionally splitting component loadings by exchange
rate regime, and attaches the dependence/homogeneity/loading-sum tests.
"""

from __future__ import annotations

import time
import warnings as _warnings
from dataclasses import dataclass, replace

import numpy as np

from .diagnostics import cd_test, delta_test, loading_sum_test, mg_wald_test
from .errors import (
    AlignmentError,
    DiagnosticsError,
    PipelineHaltError,
    SpecificationError,
)
from .factors import FactorCount, FactorSet, count_factors, default_kmax, extract_pcs
from .paneldata import Panel
from .regress import (
    ROLE_PC,
    FitResult,
    ModelSpec,
    SampleInfo,
    composite_residuals,
    fit,
)


@dataclass(frozen=True)
class PipelineOptions:
    """Switches for the three-step run.

    ``pcs`` overrides the number of components carried to step 3 (default:
    the growth-rate count of the composite).  ``pc_source`` chooses whether
    components come from the composite alone or from the composite stacked
    with the standardized observed global series.  ``strict_cd`` halts when
    step 1 leaves strong dependence at ``cd_alpha``.
    """

    pcs: int | None = None
    kmax: int | None = None
    pc_source: str = "composite"
    subtract_observed_cf: bool = False
    strict_cd: bool = False
    cd_alpha: float = 0.01

    def __post_init__(self):
        if self.pc_source not in ("composite", "composite+observed"):
            raise SpecificationError("pc_source must be composite or composite+observed")
        if self.pcs is not None and self.pcs < 1:
            raise SpecificationError("pcs override must be >= 1")


@dataclass(frozen=True)
class SkippedTest:
    """A test that was infeasible on this sample, with the reason.

    Happens e.g. for the split-loading homogeneity test when regime
    membership never varies within any country, so no unit identifies both
    regimes.  Recorded rather than fatal: failing configurations must
    still produce a result document.
    """

    name: str
    reason: str


def _try_test(tests: dict, key: str, thunk):
    try:
        tests[key] = thunk()
    except DiagnosticsError as exc:
        tests[key] = SkippedTest(name=key, reason=f"{type(exc).__name__}: {exc}")


@dataclass(frozen=True)
class NumFacReport:
    k_dependent: int
    k_composite: int
    dependent: FactorCount
    composite: FactorCount
    kmax: int


@dataclass(frozen=True)
class PipelineResult:
    step1: FitResult
    numfac: NumFacReport
    factorset: FactorSet
    step3: FitResult
    tests: dict
    n_components: int
    warnings: tuple[str, ...]
    provenance: dict


def _family_trim(spec: ModelSpec) -> int:
    """One shared sample for every specification derived from ``spec``."""
    trim = max(spec.lag_dep, 1 if spec.regime_var else 0)
    if spec.observed_cf:
        trim = max(trim, spec.cf_lags)
    if spec.csa is not None:
        trim = max(trim, spec.csa.lags)
    return trim


def _observed_rows(panel: Panel, names, window_len: int) -> np.ndarray:
    rows = []
    for name in names:
        vec = panel.get(name)[-window_len:]
        sd = vec.std(ddof=1)
        rows.append((vec - vec.mean()) / sd if sd > 0 else vec - vec.mean())
    return np.array(rows)


def _step3_tests(step3: FitResult, regime: bool) -> dict:
    tests: dict = {"cd_step3": cd_test(step3.residuals, units=step3.countries)}
    pc_cols = [c for c, r in zip(step3.columns, step3.roles) if r == ROLE_PC]
    _try_test(tests, "delta_all", lambda: delta_test(step3))
    _try_test(tests, "delta_pc", lambda: delta_test(step3, subset=pc_cols))
    _try_test(tests, "f_pc", lambda: mg_wald_test(step3, subset=pc_cols))
    if regime:
        group_a = [c for c in pc_cols if c.endswith("[F=1]")]
        group_b = [c for c in pc_cols if c.endswith("[F=0]")]
        _try_test(tests, "loading_sum",
                  lambda: loading_sum_test(step3, group_a, group_b))
    return tests


def run_three_step(panel: Panel, spec: ModelSpec,
                   options: PipelineOptions | None = None) -> PipelineResult:
    """Run the CCE-MG / factor-extraction / PC-MG sequence on ``panel``.

    ``spec`` must carry both the cross-section-average augmentation and the
    observed common factors for step 1; its ``regime_var``, if set, applies
    to the component loadings in step 3 only.
    """
    options = options or PipelineOptions()
    if spec.csa is None or not spec.observed_cf:
        raise SpecificationError("step 1 needs csa augmentation and observed common factors")
    if spec.estimator != "MG" or spec.pooled_cce:
        raise SpecificationError("the pipeline is defined for the MG estimator")

    trim = _family_trim(spec)
    recorded: list[str] = []

    step1_spec = replace(spec, pcs=None, regime_var=None)
    step1 = fit(step1_spec, panel, trim=trim)
    cd1 = cd_test(step1.residuals, units=step1.countries)
    if options.strict_cd and cd1.p_value < options.cd_alpha:
        raise PipelineHaltError(
            f"step 1 residuals show strong cross-sectional dependence "
            f"(CD={cd1.statistic:.3f}, p={cd1.p_value:.4f}); add cross-section "
            f"average or common-factor lags and rerun")

    composite = composite_residuals(step1, options.subtract_observed_cf)
    step1 = replace(step1, composite=composite)

    t_eff = step1.sample.n_periods
    kmax = options.kmax or default_kmax(step1.sample.n_countries, t_eff)
    count_y = count_factors(step1.design.y, kmax=kmax)
    count_u = count_factors(composite, kmax=kmax)
    numfac = NumFacReport(k_dependent=count_y.k_gr, k_composite=count_u.k_gr,
                          dependent=count_y, composite=count_u, kmax=kmax)
    if count_u.k_gr != count_y.k_gr:
        msg = (f"factor counts differ: {count_u.k_gr} in the composite vs "
               f"{count_y.k_gr} in the dependent variable")
        recorded.append(msg)
        _warnings.warn(msg, RuntimeWarning, stacklevel=2)
    if count_u.k_gr == count_u.kmax or count_u.truncated:
        recorded.append("composite factor count sits at the scan boundary")

    m = options.pcs or count_u.k_gr
    source = composite
    if options.pc_source == "composite+observed":
        source = np.vstack([composite, _observed_rows(panel, spec.observed_cf, t_eff)])
    factorset = extract_pcs(source, m)

    step3_spec = replace(spec, observed_cf=(), cf_lags=0, csa=None, pcs=m)
    step3 = fit(step3_spec, panel, factorset=factorset, trim=trim)
    if "ocf" in step3.roles:
        raise SpecificationError("observed common factors leaked into the step-3 design")

    tests = {"cd_step1": cd1}
    tests.update(_step3_tests(step3, regime=spec.regime_var is not None))

    provenance = {
        "spec": _spec_dict(spec),
        "options": {
            "pcs": options.pcs, "kmax": options.kmax,
            "pc_source": options.pc_source,
            "subtract_observed_cf": options.subtract_observed_cf,
            "strict_cd": options.strict_cd, "cd_alpha": options.cd_alpha,
        },
        "versions": _versions(),
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    return PipelineResult(step1=step1, numfac=numfac, factorset=factorset,
                          step3=step3, tests=tests, n_components=m,
                          warnings=tuple(recorded), provenance=provenance)


def _spec_dict(spec: ModelSpec) -> dict:
    return {
        "dependent": spec.dependent, "lag_dep": spec.lag_dep,
        "regressors": list(spec.regressors),
        "observed_cf": list(spec.observed_cf), "cf_lags": spec.cf_lags,
        "csa": None if spec.csa is None else
               {"variables": list(spec.csa.variables), "lags": spec.csa.lags},
        "pcs": spec.pcs, "regime_var": spec.regime_var,
        "estimator": spec.estimator, "pooled_cce": spec.pooled_cce,
    }


def _versions() -> dict:
    import numpy
    import pandas
    import scipy

    from . import __version__
    return {"panelfactors": __version__, "numpy": numpy.__version__,
            "scipy": scipy.__version__, "pandas": pandas.__version__}


# ---------------------------------------------------------------------------
# benchmark family
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BenchmarkColumn:
    label: str
    estimator: str
    fit: FitResult
    tests: dict


@dataclass(frozen=True)
class BenchmarkResult:
    columns: tuple[BenchmarkColumn, ...]
    factorset: FactorSet
    numfac: NumFacReport
    n_components: int
    sample: SampleInfo
    warnings: tuple[str, ...]


def run_benchmarks(panel: Panel, spec: ModelSpec,
                   options: PipelineOptions | None = None) -> BenchmarkResult:
    """The ten-column estimator family on one shared trimmed sample.

    Columns: CCE-MG; FE; TWFE; FE with observed factors; FE with
    regime-split factors; MG; MG with observed factors; MG with regime
    splits; MG with components; MG with regime-split components.  The
    components come from column (1)'s composite.
    """
    options = options or PipelineOptions()
    if spec.csa is None or not spec.observed_cf:
        raise SpecificationError("the benchmark family needs csa and observed_cf")
    if spec.regime_var is None:
        raise SpecificationError("the benchmark family needs a regime variable")

    run = run_three_step(panel, spec, options)
    trim = _family_trim(spec)
    m, factorset = run.n_components, run.factorset

    base = replace(spec, csa=None, observed_cf=(), cf_lags=0,
                   pcs=None, regime_var=None)
    family = [
        ("(1)", "MG-CCE", run.step1.spec),
        ("(2)", "FE", replace(base, estimator="FE")),
        ("(3)", "TWFE", replace(base, estimator="TWFE")),
        ("(4)", "FE", replace(base, estimator="FE", observed_cf=spec.observed_cf,
                              cf_lags=spec.cf_lags)),
        ("(5)", "FE", replace(base, estimator="FE", observed_cf=spec.observed_cf,
                              cf_lags=spec.cf_lags, regime_var=spec.regime_var)),
        ("(6)", "MG", base),
        ("(7)", "MG", replace(base, observed_cf=spec.observed_cf, cf_lags=spec.cf_lags)),
        ("(8)", "MG", replace(base, observed_cf=spec.observed_cf, cf_lags=spec.cf_lags,
                              regime_var=spec.regime_var)),
        ("(9)", "MG", replace(base, pcs=m)),
        ("(10)", "MG", replace(base, pcs=m, regime_var=spec.regime_var)),
    ]

    columns: list[BenchmarkColumn] = []
    for label, estimator, col_spec in family:
        if label == "(1)":
            result = run.step1
        else:
            result = fit(col_spec, panel, factorset=factorset, trim=trim)
        tests: dict = {"cd": cd_test(result.residuals, units=result.countries)}
        if result.mg is not None:
            _try_test(tests, "delta_all", lambda r=result: delta_test(r))
            pc_cols = [c for c, r in zip(result.columns, result.roles) if r == ROLE_PC]
            if pc_cols:
                _try_test(tests, "delta_pc",
                          lambda r=result: delta_test(r, subset=pc_cols))
                _try_test(tests, "f_pc",
                          lambda r=result: mg_wald_test(r, subset=pc_cols))
                split_a = [c for c in pc_cols if c.endswith("[F=1]")]
                if split_a:
                    split_b = [c for c in pc_cols if c.endswith("[F=0]")]
                    _try_test(tests, "loading_sum",
                              lambda r=result: loading_sum_test(r, split_a, split_b))
        columns.append(BenchmarkColumn(label=label, estimator=estimator,
                                       fit=result, tests=tests))

    samples = {c.fit.sample for c in columns}
    if len(samples) != 1:
        raise AlignmentError(f"benchmark columns disagree on the sample: {samples}")

    return BenchmarkResult(columns=tuple(columns), factorset=factorset,
                           numfac=run.numfac, n_components=m,
                           sample=columns[0].fit.sample, warnings=run.warnings)


# ---------------------------------------------------------------------------
# dissection regressions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PcRegression:
    component: str
    mode: str
    columns: tuple[str, ...]
    coefficients: np.ndarray
    se: np.ndarray
    p_value: np.ndarray
    r_squared: float
    n_periods: int


def _standardize(vec: np.ndarray) -> np.ndarray:
    sd = vec.std(ddof=1)
    if sd == 0:
        raise SpecificationError("cannot standardize a constant series")
    return (vec - vec.mean()) / sd


def dissect_pcs(factorset: FactorSet, observables: dict[str, np.ndarray],
                mode: str = "levels") -> tuple[PcRegression, ...]:
    """Regress each standardized component on standardized observables.

    ``mode="first-differences"`` differences the observables before
    standardizing, which costs the first period.
    """
    from scipy import stats as _stats

    from .regress import ols

    if mode not in ("levels", "first-differences"):
        raise SpecificationError("mode must be levels or first-differences")
    t = factorset.components.shape[0]
    for name, vec in observables.items():
        if np.asarray(vec).shape != (t,):
            raise SpecificationError(f"observable {name!r} must be a length-{t} series")

    if mode == "first-differences":
        transformed = {n: _standardize(np.diff(np.asarray(v, dtype=float)))
                       for n, v in observables.items()}
        offset = 1
    else:
        transformed = {n: _standardize(np.asarray(v, dtype=float))
                       for n, v in observables.items()}
        offset = 0
    t_used = t - offset
    names = tuple(transformed)
    if t_used <= len(names) + 2:
        raise SpecificationError(
            f"{t_used} periods is too short for {len(names)} observables")

    out = []
    for k in range(factorset.n_components):
        y = _standardize(factorset.components[:, k])[offset:]
        X = np.column_stack([*(transformed[n] for n in names), np.ones(t_used)])
        res = ols(y, X)
        se = np.sqrt(np.diag(res.cov))
        with np.errstate(divide="ignore", invalid="ignore"):
            tstat = res.coefficients / se
        p = 2.0 * _stats.norm.sf(np.abs(tstat))
        out.append(PcRegression(
            component=f"PC{k + 1}", mode=mode, columns=(*names, "const"),
            coefficients=res.coefficients, se=se, p_value=p,
            r_squared=res.r_squared, n_periods=t_used))
    return tuple(out)
