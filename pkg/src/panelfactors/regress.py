"""Least-squares core and the panel estimator family.

Estimators: unit-by-unit OLS with Mean Group (MG) aggregation, optionally
augmented with cross-section averages (CCE-MG) or principal components;
pooled within estimators (FE, TWFE) with country-clustered standard
errors; and pooled CCE with unit-specific average loadings.

Designs are built per country with a fixed column order
``[lagged dependent | regressors | observed common factors (+lags) |
cross-section averages (+lags) | principal components | intercept]``.
When a regime variable is set, the common-factor and component columns are
split into regime-on/regime-off interactions evaluated at a one-quarter
lag.  Exactly collinear columns are pruned by rank-revealing QR with a
relative pivot tolerance of 1e-10 and reported as dropped, never
reordered.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
from scipy import linalg as sla
from scipy import stats

from .errors import (
    DegenerateRegressionError,
    InsufficientObservationsError,
    MissingDataError,
    SchemaError,
    SpecificationError,
    UnitRegressionError,
)
from .paneldata import Panel, cross_section_averages

PIVOT_TOL = 1e-10

ROLE_LAGDEP = "lagdep"
ROLE_REGRESSOR = "regressor"
ROLE_OCF = "ocf"
ROLE_CSA = "csa"
ROLE_PC = "pc"
ROLE_CONST = "const"


@dataclass(frozen=True)
class CsaSpec:
    """Cross-section-average augmentation: which variables, how many lags."""

    variables: tuple[str, ...]
    lags: int = 0

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        if self.lags < 0:
            raise SchemaError("csa lags must be >= 0")


@dataclass(frozen=True)
class ModelSpec:
    """Declarative description of one regression column.

    ``estimator`` is one of ``MG``, ``FE``, ``TWFE``; ``pooled_cce`` runs
    the pooled variant of the CSA-augmented design instead.  ``regime_var``
    names a 0/1 panel variable; interactions are evaluated at t-1 and split
    the observed-common-factor and principal-component columns.
    """

    dependent: str
    lag_dep: int = 1
    regressors: tuple[str, ...] = ()
    observed_cf: tuple[str, ...] = ()
    cf_lags: int = 0
    csa: CsaSpec | None = None
    pcs: int | None = None
    regime_var: str | None = None
    estimator: str = "MG"
    pooled_cce: bool = False

    def __post_init__(self):
        object.__setattr__(self, "regressors", tuple(self.regressors))
        object.__setattr__(self, "observed_cf", tuple(self.observed_cf))
        if self.lag_dep not in (0, 1):
            raise SchemaError("lag_dep must be 0 or 1")
        if self.cf_lags < 0:
            raise SchemaError("cf_lags must be >= 0")
        if self.estimator not in ("MG", "FE", "TWFE"):
            raise SchemaError(f"unknown estimator {self.estimator!r}")
        if self.pcs is not None and self.pcs < 1:
            raise SchemaError("pcs must be >= 1 when set")
        if self.pooled_cce and self.csa is None:
            raise SchemaError("pooled_cce requires csa augmentation")

    def required_trim(self) -> int:
        """Initial periods consumed by lags; uniform across units."""
        trim = self.lag_dep
        if self.observed_cf:
            trim = max(trim, self.cf_lags)
        if self.csa is not None:
            trim = max(trim, self.csa.lags)
        if self.regime_var is not None:
            trim = max(trim, 1)
        return trim


# ---------------------------------------------------------------------------
# least-squares primitive
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OlsResult:
    coefficients: np.ndarray          # length K; zeros at dropped columns
    residuals: np.ndarray
    fitted: np.ndarray
    cov: np.ndarray                   # K x K; zero rows/cols at dropped
    r_squared: float
    sigma2: float
    rank: int
    dropped: tuple[int, ...]          # original column indices pruned


def ols(y: np.ndarray, X: np.ndarray) -> OlsResult:
    """OLS of ``y`` on the columns of ``X`` with rank-revealing pruning.

    Columns whose QR pivot falls below ``PIVOT_TOL`` relative to the
    leading pivot are dropped (coefficient fixed at zero and reported),
    so exactly collinear designs are handled deterministically.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise SchemaError("ols expects a T-vector and a T x K matrix")
    t, k = X.shape
    if t <= k:
        raise InsufficientObservationsError(
            f"{t} observations for {k} columns; need T > K"
        )
    if np.ptp(y) == 0.0:
        raise DegenerateRegressionError("dependent variable has zero variance")

    q, r, piv = sla.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    lead = diag[0] if diag.size else 0.0
    if lead == 0.0:
        rank = 0
    else:
        rank = int(np.sum(diag > PIVOT_TOL * lead))
    dropped = tuple(int(j) for j in np.sort(piv[rank:]))

    beta = np.zeros(k)
    cov = np.zeros((k, k))
    if rank > 0:
        qty = q.T @ y
        beta_p = sla.solve_triangular(r[:rank, :rank], qty[:rank])
        # back to original column order
        beta[piv[:rank]] = beta_p
    residuals = y - X @ beta
    fitted = y - residuals
    ssr = float(residuals @ residuals)
    sigma2 = ssr / (t - rank) if t > rank else 0.0
    if rank > 0:
        rinv = sla.solve_triangular(r[:rank, :rank], np.eye(rank))
        xtx_inv = rinv @ rinv.T  # (X_kept' X_kept)^-1 in pivot order
        cov_p = sigma2 * xtx_inv
        cov[np.ix_(piv[:rank], piv[:rank])] = cov_p
    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ssr / tss if tss > 0 else 0.0
    return OlsResult(coefficients=beta, residuals=residuals, fitted=fitted,
                     cov=cov, r_squared=r2, sigma2=sigma2, rank=rank,
                     dropped=dropped)


def demean(block: np.ndarray, mode: str = "unit") -> np.ndarray:
    """Within transformation of an N x T block.

    ``unit`` subtracts country means; ``unit+time`` additionally subtracts
    period means and adds back the grand mean (exact on balanced panels).
    """
    block = np.asarray(block, dtype=float)
    if block.ndim != 2:
        raise SchemaError("demean expects an N x T block")
    out = block - block.mean(axis=1, keepdims=True)
    if mode == "unit":
        return out
    if mode == "unit+time":
        return out - block.mean(axis=0, keepdims=True) + block.mean()
    raise SchemaError(f"unknown demean mode {mode!r}")


# ---------------------------------------------------------------------------
# design construction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Design:
    columns: tuple[str, ...]
    roles: tuple[str, ...]
    y: np.ndarray                     # N x T_eff
    X: np.ndarray                     # N x T_eff x K
    countries: tuple[str, ...]
    periods: tuple[int, ...]          # effective periods
    trim: int

    @property
    def n_columns(self) -> int:
        return len(self.columns)

    def role_indices(self, *roles: str) -> np.ndarray:
        return np.array([j for j, r in enumerate(self.roles) if r in roles], dtype=int)


def _common_vector(panel: Panel, name: str) -> np.ndarray:
    vec = panel.get(name)
    if vec.ndim != 1:
        raise SpecificationError(f"{name!r} is country-specific; expected a common series")
    return vec


def build_design(spec: ModelSpec, panel: Panel, factorset=None,
                 trim: int | None = None) -> Design:
    """Assemble per-country design matrices for ``spec``.

    ``trim`` overrides the number of initial periods dropped (used to put
    several specifications on one shared sample); it must cover the lags
    the model consumes.
    """
    needed = spec.required_trim()
    if trim is None:
        trim = needed
    elif trim < needed:
        raise SpecificationError(f"trim={trim} below the {needed} periods the model consumes")
    n, t = panel.n_countries, panel.n_periods
    t_eff = t - trim
    if t_eff < 2:
        raise SpecificationError("estimation window is empty after trimming")

    for name in (spec.dependent, *spec.regressors):
        if panel.is_common(name):
            raise SpecificationError(f"{name!r} must be country-specific")

    window = slice(trim, t)
    y_full = panel.get(spec.dependent)
    y = y_full[:, window]

    # common building blocks, computed once
    columns: list[str] = []
    roles: list[str] = []
    unit_cols: list[np.ndarray | None] = []   # N x T_eff, or None with common_cols entry
    common_cols: list[np.ndarray | None] = [] # T_eff vectors for unit-invariant columns

    def add_unit(label: str, role: str, block: np.ndarray):
        columns.append(label)
        roles.append(role)
        unit_cols.append(block)
        common_cols.append(None)

    def add_common(label: str, role: str, vec: np.ndarray):
        columns.append(label)
        roles.append(role)
        unit_cols.append(None)
        common_cols.append(vec)

    if spec.lag_dep:
        add_unit(f"{spec.dependent}(t-1)", ROLE_LAGDEP, y_full[:, trim - 1:t - 1])
    for name in spec.regressors:
        add_unit(name, ROLE_REGRESSOR, panel.get(name)[:, window])

    ocf_block: list[tuple[str, np.ndarray]] = []
    for name in spec.observed_cf:
        vec = _common_vector(panel, name)
        ocf_block.append((name, vec[window]))
        for l in range(1, spec.cf_lags + 1):
            ocf_block.append((f"{name}(t-{l})", vec[trim - l:t - l]))

    csa_block: list[tuple[str, np.ndarray]] = []
    if spec.csa is not None:
        averages = cross_section_averages(panel, spec.csa.variables, spec.csa.lags)
        for label, vec in averages.items():
            csa_block.append((label, vec[window]))

    pc_block: list[tuple[str, np.ndarray]] = []
    if spec.pcs is not None:
        if factorset is None:
            raise SpecificationError("spec requests principal components but no FactorSet given")
        comps = factorset.components
        if comps.shape[0] != t_eff:
            raise SpecificationError(
                f"FactorSet spans {comps.shape[0]} periods but the design window has {t_eff}"
            )
        if spec.pcs > comps.shape[1]:
            raise SpecificationError(
                f"spec requests {spec.pcs} components; FactorSet holds {comps.shape[1]}"
            )
        for k in range(spec.pcs):
            pc_block.append((f"PC{k + 1}", comps[:, k]))

    if spec.regime_var is not None:
        regime_full = panel.get(spec.regime_var)
        if regime_full.ndim != 2:
            raise SpecificationError("regime variable must be country-specific")
        regime = regime_full[:, trim - 1:t - 1]  # one-quarter lag
        if np.isnan(regime).any():
            raise MissingDataError(f"regime variable {spec.regime_var!r} missing in window")
        if not np.isin(regime, (0.0, 1.0)).all():
            raise SpecificationError(f"regime variable {spec.regime_var!r} is not 0/1-valued")

        def add_split(block, role):
            for state, tag in ((1.0, "[F=1]"), (0.0, "[F=0]")):
                ind = (regime == state).astype(float)  # N x T_eff
                for label, vec in block:
                    add_unit(f"{label} {tag}", role, vec[np.newaxis, :] * ind)

        add_split(ocf_block, ROLE_OCF)
        for label, vec in csa_block:
            add_common(label, ROLE_CSA, vec)
        add_split(pc_block, ROLE_PC)
    else:
        for label, vec in ocf_block:
            add_common(label, ROLE_OCF, vec)
        for label, vec in csa_block:
            add_common(label, ROLE_CSA, vec)
        for label, vec in pc_block:
            add_common(label, ROLE_PC, vec)

    add_common("const", ROLE_CONST, np.ones(t_eff))

    k = len(columns)
    X = np.empty((n, t_eff, k))
    for j in range(k):
        if unit_cols[j] is not None:
            X[:, :, j] = unit_cols[j]
        else:
            X[:, :, j] = common_cols[j][np.newaxis, :]

    if np.isnan(y).any():
        raise MissingDataError(f"dependent {spec.dependent!r} missing inside the window")
    if np.isnan(X).any():
        bad = [columns[j] for j in range(k) if np.isnan(X[:, :, j]).any()]
        raise MissingDataError(f"design columns contain missing cells: {bad}; balance first")

    return Design(columns=tuple(columns), roles=tuple(roles), y=y, X=X,
                  countries=panel.countries, periods=panel.periods[trim:], trim=trim)


# ---------------------------------------------------------------------------
# fit results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UnitFit:
    coefficients: np.ndarray
    cov: np.ndarray
    residuals: np.ndarray
    r_squared: float
    sigma2: float
    rank: int
    dropped: tuple[int, ...]


@dataclass(frozen=True)
class MgAggregate:
    mean: np.ndarray
    se: np.ndarray
    t_stat: np.ndarray
    p_value: np.ndarray
    n_units: np.ndarray               # units whose regression retained each column


@dataclass(frozen=True)
class PooledAggregate:
    coefficients: np.ndarray
    se: np.ndarray
    t_stat: np.ndarray
    p_value: np.ndarray
    vcov: np.ndarray
    dropped: tuple[int, ...]
    n_clusters: int


@dataclass(frozen=True)
class SampleInfo:
    n_countries: int
    n_periods: int
    n_obs: int


@dataclass(frozen=True)
class FitResult:
    """Estimation output shared by every estimator in the family.

    ``per_unit`` (and the retained ``design``) are present exactly for MG
    fits; ``pooled`` for FE/TWFE/pooled-CCE.  ``composite`` is filled by
    :func:`composite_residuals` for step-1 fits.
    """

    spec: ModelSpec
    columns: tuple[str, ...]
    roles: tuple[str, ...]
    countries: tuple[str, ...]
    periods: tuple[int, ...]
    sample: SampleInfo
    residuals: np.ndarray             # N x T_eff
    r2: float
    r2_within: float
    r2_mg: float | None = None
    per_unit: Mapping[str, UnitFit] | None = None
    mg: MgAggregate | None = None
    pooled: PooledAggregate | None = None
    composite: np.ndarray | None = None
    design: Design | None = None
    metadata: Mapping[str, str] = field(default_factory=dict)

    @property
    def estimator_label(self) -> str:
        if self.spec.pooled_cce:
            return "CCE-P"
        if self.spec.estimator == "MG" and self.spec.csa is not None:
            return "MG-CCE"
        return self.spec.estimator

    def coefficient_table(self) -> list[dict]:
        """Rows of (label, estimate, se, p) for the reporting layer."""
        rows = []
        if self.mg is not None:
            src = zip(self.columns, self.mg.mean, self.mg.se, self.mg.p_value)
        elif self.pooled is not None:
            src = zip(self.columns, self.pooled.coefficients, self.pooled.se,
                      self.pooled.p_value)
        else:  # pragma: no cover
            return rows
        for label, est, se, p in src:
            rows.append({"label": label, "estimate": float(est),
                         "se": float(se), "p": float(p)})
        return rows


def _mg_aggregate(unit_fits: Sequence[UnitFit], k: int) -> MgAggregate:
    mean = np.full(k, np.nan)
    se = np.full(k, np.nan)
    n_units = np.zeros(k, dtype=int)
    estimates = np.array([uf.coefficients for uf in unit_fits])  # N x K
    retained = np.array([[j not in uf.dropped for j in range(k)] for uf in unit_fits])
    for j in range(k):
        sel = retained[:, j]
        nj = int(sel.sum())
        n_units[j] = nj
        if nj == 0:
            continue
        bj = estimates[sel, j]
        mean[j] = bj.mean()
        if nj >= 2:
            se[j] = np.sqrt(np.sum((bj - mean[j]) ** 2) / (nj * (nj - 1)))
    with np.errstate(divide="ignore", invalid="ignore"):
        t_stat = mean / se
    p = 2.0 * stats.norm.sf(np.abs(t_stat))
    return MgAggregate(mean=mean, se=se, t_stat=t_stat, p_value=p, n_units=n_units)


def _clustered_vcov(X: np.ndarray, residuals: np.ndarray, groups: np.ndarray,
                    kept: np.ndarray) -> tuple[np.ndarray, int]:
    """Country-clustered sandwich on the retained columns, scattered back."""
    k = X.shape[1]
    xk = X[:, kept]
    xtx_inv = np.linalg.inv(xk.T @ xk)
    labels = np.unique(groups)
    meat = np.zeros((kept.size, kept.size))
    for g in labels:
        sel = groups == g
        score = xk[sel].T @ residuals[sel]
        meat += np.outer(score, score)
    n, g = X.shape[0], labels.size
    correction = (g / (g - 1)) * ((n - 1) / (n - kept.size)) if g > 1 else 1.0
    vcov_k = correction * xtx_inv @ meat @ xtx_inv
    vcov = np.zeros((k, k))
    vcov[np.ix_(kept, kept)] = vcov_k
    return vcov, g


def _pooled_from_ols(res: OlsResult, X: np.ndarray, groups: np.ndarray) -> PooledAggregate:
    k = X.shape[1]
    kept = np.array([j for j in range(k) if j not in res.dropped], dtype=int)
    vcov, g = _clustered_vcov(X, res.residuals, groups, kept)
    se = np.sqrt(np.diag(vcov))
    se[list(res.dropped)] = np.nan
    with np.errstate(divide="ignore", invalid="ignore"):
        t_stat = res.coefficients / se
    p = 2.0 * stats.t.sf(np.abs(t_stat), df=max(g - 1, 1))
    return PooledAggregate(coefficients=res.coefficients, se=se, t_stat=t_stat,
                           p_value=p, vcov=vcov, dropped=res.dropped, n_clusters=g)


def _stacked_r2(y: np.ndarray, residuals: np.ndarray) -> float:
    """Pooled squared correlation between fitted (= y - e) and y."""
    ys = y.ravel()
    fs = ys - residuals.ravel()
    if np.ptp(ys) == 0 or np.ptp(fs) == 0:
        return 0.0
    return float(np.corrcoef(fs, ys)[0, 1] ** 2)


def fit(spec: ModelSpec, panel: Panel, factorset=None, trim: int | None = None) -> FitResult:
    """Estimate ``spec`` on ``panel``.

    MG runs unit-by-unit OLS and averages coefficients with nonparametric
    standard errors; FE/TWFE run pooled OLS on within-transformed data
    with country-clustered standard errors; ``pooled_cce`` pools the slope
    columns while keeping unit-specific cross-section-average loadings.
    """
    design = build_design(spec, panel, factorset=factorset, trim=trim)
    n, t_eff, k = design.X.shape
    sample = SampleInfo(n_countries=n, n_periods=t_eff, n_obs=n * t_eff)
    metadata = {"mg_se": "nonparametric coefficient dispersion",
                "pooled_se": "clustered by country (CR1 correction, t with G-1 df)"}

    if spec.pooled_cce:
        return _fit_pooled_cce(spec, design, sample, metadata)
    if spec.estimator in ("FE", "TWFE"):
        return _fit_within(spec, design, sample, metadata)

    unit_fits: dict[str, UnitFit] = {}
    failures: dict[str, Exception] = {}
    for i, country in enumerate(design.countries):
        try:
            res = ols(design.y[i], design.X[i])
        except Exception as exc:  # collected, re-raised in aggregate
            failures[country] = exc
            continue
        unit_fits[country] = UnitFit(
            coefficients=res.coefficients, cov=res.cov, residuals=res.residuals,
            r_squared=res.r_squared, sigma2=res.sigma2, rank=res.rank,
            dropped=res.dropped)
    if failures:
        raise UnitRegressionError(failures)

    mg = _mg_aggregate([unit_fits[c] for c in design.countries], k)
    residuals = np.vstack([unit_fits[c].residuals for c in design.countries])
    ssr = float(np.sum(residuals ** 2))
    within_tss = float(np.sum((design.y - design.y.mean(axis=1, keepdims=True)) ** 2))
    r2_within = 1.0 - ssr / within_tss if within_tss > 0 else 0.0
    r2_mg = float(np.mean([unit_fits[c].r_squared for c in design.countries]))
    return FitResult(
        spec=spec, columns=design.columns, roles=design.roles,
        countries=design.countries, periods=design.periods, sample=sample,
        residuals=residuals, r2=_stacked_r2(design.y, residuals),
        r2_within=r2_within, r2_mg=r2_mg, per_unit=unit_fits, mg=mg,
        design=design, metadata=metadata)


def _fit_within(spec: ModelSpec, design: Design, sample: SampleInfo,
                metadata: dict) -> FitResult:
    mode = "unit" if spec.estimator == "FE" else "unit+time"
    n, t_eff, _ = design.X.shape
    use = [j for j, r in enumerate(design.roles) if r != ROLE_CONST]
    if not use:
        raise SpecificationError("within estimators need at least one non-intercept column")
    labels = tuple(design.columns[j] for j in use)
    roles = tuple(design.roles[j] for j in use)
    y_w = demean(design.y, mode)
    cols = [demean(design.X[:, :, j], mode).ravel() for j in use]
    Xs = np.column_stack(cols)
    ys = y_w.ravel()
    groups = np.repeat(np.arange(n), t_eff)
    res = ols(ys, Xs)
    pooled = _pooled_from_ols(res, Xs, groups)
    residuals = res.residuals.reshape(n, t_eff)
    tss_w = float(np.sum(ys ** 2))
    ssr = float(np.sum(res.residuals ** 2))
    r2_within = 1.0 - ssr / tss_w if tss_w > 0 else 0.0
    return FitResult(
        spec=spec, columns=labels, roles=roles, countries=design.countries,
        periods=design.periods, sample=sample, residuals=residuals,
        r2=_stacked_r2(design.y, residuals), r2_within=r2_within,
        pooled=pooled, metadata=metadata)


def _fit_pooled_cce(spec: ModelSpec, design: Design, sample: SampleInfo,
                    metadata: dict) -> FitResult:
    """Pooled CCE: slopes pooled, CSA loadings and intercepts unit-specific."""
    n, t_eff, _ = design.X.shape
    pooled_idx = design.role_indices(ROLE_LAGDEP, ROLE_REGRESSOR, ROLE_OCF, ROLE_PC)
    hetero_idx = design.role_indices(ROLE_CSA, ROLE_CONST)
    labels = tuple(design.columns[j] for j in pooled_idx)
    roles = tuple(design.roles[j] for j in pooled_idx)
    rows = n * t_eff
    k_pooled = pooled_idx.size
    k_het = hetero_idx.size
    X = np.zeros((rows, k_pooled + n * k_het))
    for i in range(n):
        band = slice(i * t_eff, (i + 1) * t_eff)
        X[band, :k_pooled] = design.X[i][:, pooled_idx]
        X[band, k_pooled + i * k_het:k_pooled + (i + 1) * k_het] = design.X[i][:, hetero_idx]
    ys = design.y.ravel()
    groups = np.repeat(np.arange(n), t_eff)
    res = ols(ys, X)
    pooled_full = _pooled_from_ols(res, X, groups)
    sel = np.arange(k_pooled)
    pooled = PooledAggregate(
        coefficients=pooled_full.coefficients[sel], se=pooled_full.se[sel],
        t_stat=pooled_full.t_stat[sel], p_value=pooled_full.p_value[sel],
        vcov=pooled_full.vcov[np.ix_(sel, sel)],
        dropped=tuple(j for j in pooled_full.dropped if j < k_pooled),
        n_clusters=pooled_full.n_clusters)
    residuals = res.residuals.reshape(n, t_eff)
    within_tss = float(np.sum((design.y - design.y.mean(axis=1, keepdims=True)) ** 2))
    ssr = float(np.sum(res.residuals ** 2))
    metadata = dict(metadata)
    metadata["pooled_cce"] = ("homogeneous slopes assumed; variance estimator is "
                              "country-clustered, no small-sample theory claimed")
    return FitResult(
        spec=spec, columns=labels, roles=roles, countries=design.countries,
        periods=design.periods, sample=sample, residuals=residuals,
        r2=_stacked_r2(design.y, residuals),
        r2_within=1.0 - ssr / within_tss if within_tss > 0 else 0.0,
        pooled=pooled, metadata=metadata)


def composite_residuals(fit_result: FitResult, subtract_observed_cf: bool = False
                        ) -> np.ndarray:
    """Dependent variable net of the estimated dynamics and the unit-specific
    regressor effects: ``u_hat = y - rho_hat*y(t-1) - X*beta_hat``.

    Contributions of cross-section averages, the intercept and (by default)
    the observed common factors are left in, so the full common structure
    plus noise is retained.  Requires a step-1 style fit: MG with CSA
    augmentation.
    """
    if fit_result.per_unit is None or fit_result.design is None:
        raise SpecificationError("composite residuals need an MG fit with retained design")
    if fit_result.spec.csa is None:
        raise SpecificationError("composite residuals are defined for CSA-augmented fits")
    roles = {ROLE_LAGDEP, ROLE_REGRESSOR}
    if subtract_observed_cf:
        roles.add(ROLE_OCF)
    design = fit_result.design
    sel = design.role_indices(*roles)
    out = design.y.copy()
    if sel.size:
        for i, country in enumerate(design.countries):
            b = fit_result.per_unit[country].coefficients[sel]
            out[i] -= design.X[i][:, sel] @ b
    return out


def with_composite(fit_result: FitResult, subtract_observed_cf: bool = False) -> FitResult:
    return replace(fit_result,
                   composite=composite_residuals(fit_result, subtract_observed_cf))
