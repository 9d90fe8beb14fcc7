"""Test battery: cross-sectional dependence, slope homogeneity, loading sums.

All p-values are asymptotic-normal (or chi-square for the joint Wald);
no small-sample bootstrap is attempted, and each report says which
reference distribution produced its p-value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .errors import (
    DegenerateRowError,
    DegenerateVarianceError,
    SchemaError,
    SelectorError,
    SpecificationError,
)
from .regress import ROLE_CONST, FitResult


@dataclass(frozen=True)
class TestReport:
    name: str
    statistic: float
    p_value: float
    null_description: str
    inputs: Mapping[str, int]
    details: Mapping[str, float | str] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# CD test
# ---------------------------------------------------------------------------

def cd_test(residuals: np.ndarray, units: Sequence[str] | None = None) -> TestReport:
    """Weighted average of pairwise residual correlations.

    ``CD = sqrt(2T/(N(N-1))) * sum_{i<j} corr(row_i, row_j)`` with a
    two-sided standard-normal p-value.  The null is weak cross-sectional
    dependence.
    """
    U = np.asarray(residuals, dtype=float)
    if U.ndim != 2:
        raise SchemaError("cd_test expects an N x T residual matrix")
    n, t = U.shape
    if n < 2 or t < 3:
        raise SchemaError(f"need N >= 2 and T >= 3, got N={n}, T={t}")
    centered = U - U.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.sum(centered ** 2, axis=1))
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        name = units[zero[0]] if units is not None else f"row {zero[0]}"
        raise DegenerateRowError(f"unit {name} has zero residual variance")
    z = centered / norms[:, np.newaxis]
    corr = z @ z.T
    iu = np.triu_indices(n, k=1)
    total = float(corr[iu].sum())
    statistic = np.sqrt(2.0 * t / (n * (n - 1))) * total
    p = 2.0 * stats.norm.sf(abs(statistic))
    return TestReport(
        name="CD", statistic=float(statistic), p_value=float(p),
        null_description="weak cross-sectional dependence (two-sided normal)",
        inputs={"N": n, "T": t},
        details={"sum_pairwise_corr": total})


# ---------------------------------------------------------------------------
# slope homogeneity (Swamy-type dispersion)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DeltaResult:
    delta: float
    p_delta: float
    delta_adj: float
    p_delta_adj: float
    s_tilde: float
    k: int
    inputs: Mapping[str, int]
    tested: tuple[str, ...]


def _resolve_columns(fit: FitResult, selector, exclude_const: bool = True) -> list[int]:
    if selector is None:
        return [j for j, role in enumerate(fit.roles)
                if not (exclude_const and role == ROLE_CONST)]
    out = []
    for item in selector:
        if isinstance(item, (int, np.integer)):
            j = int(item)
            if not 0 <= j < len(fit.columns):
                raise SelectorError(f"column index {j} out of range")
        else:
            try:
                j = fit.columns.index(item)
            except ValueError:
                raise SelectorError(f"unknown column {item!r}") from None
        out.append(j)
    if len(set(out)) != len(out):
        raise SelectorError("selector repeats columns")
    return out


def delta_test(fit: FitResult, subset=None) -> DeltaResult:
    """Dispersion test of slope homogeneity across units.

    With unit estimates ``b_i`` on the tested subset (all other columns
    partialled out of each unit design), the statistic is
    ``S = sum_i (b_i - b_pooled)' W_i (b_i - b_pooled) / sigma2_i`` with
    precision weights ``W_i`` from the partialled cross-products, then
    ``Delta = sqrt(N) (S/N - k) / sqrt(2k)`` and the degrees-of-freedom
    adjusted variant replaces ``2k`` with ``2k(T-k-1)/(T+1)``.  Both are
    referred to the standard normal, two-sided.

    ``subset=None`` tests every non-intercept column.
    """
    if fit.per_unit is None or fit.design is None:
        raise SpecificationError("delta_test needs an MG fit with retained design")
    tested = _resolve_columns(fit, subset)
    if not tested:
        raise SelectorError("empty test subset")
    k = len(tested)
    design = fit.design
    all_idx = set(range(len(fit.columns)))
    nuisance_all = sorted(all_idx - set(tested))

    participating = []
    for country in fit.countries:
        dropped = set(fit.per_unit[country].dropped)
        if not dropped & set(tested):
            participating.append(country)
    if len(participating) < 2:
        raise SelectorError(
            "tested columns are dropped in all but "
            f"{len(participating)} unit(s); cannot measure dispersion")

    weights = []       # W_i / sigma2_i
    estimates = []     # b_i on the tested subset
    zero_var = False
    for country in participating:
        i = fit.countries.index(country)
        unit = fit.per_unit[country]
        nuisance = [j for j in nuisance_all if j not in unit.dropped]
        X1 = design.X[i][:, tested]
        if nuisance:
            X0 = design.X[i][:, nuisance]
            coef, *_ = np.linalg.lstsq(X0, X1, rcond=None)
            X1 = X1 - X0 @ coef
        w = X1.T @ X1
        # an exact fit leaves only rounding noise in sigma2
        if unit.sigma2 == 0.0 or unit.r_squared >= 1.0 - 1e-12:
            zero_var = True
            weights.append(None)
        else:
            weights.append(w / unit.sigma2)
        estimates.append(unit.coefficients[tested])
    estimates = np.array(estimates)

    n_p = len(participating)
    t_eff = design.y.shape[1]
    if zero_var:
        spread = np.ptp(estimates, axis=0)
        scale = np.maximum(np.max(np.abs(estimates), axis=0), 1.0)
        if np.all(spread < 1e-10 * scale):
            s_tilde = 0.0
        else:
            raise DegenerateVarianceError(
                "zero residual variance with dispersed unit coefficients")
    else:
        a = np.zeros((k, k))
        rhs = np.zeros(k)
        for w, b in zip(weights, estimates):
            a += w
            rhs += w @ b
        pooled = np.linalg.solve(a, rhs)
        s_tilde = 0.0
        for w, b in zip(weights, estimates):
            d = b - pooled
            s_tilde += float(d @ w @ d)

    delta = np.sqrt(n_p) * (s_tilde / n_p - k) / np.sqrt(2.0 * k)
    var_adj = 2.0 * k * (t_eff - k - 1) / (t_eff + 1)
    if var_adj <= 0:
        raise SpecificationError("T too small for the adjusted variance")
    delta_adj = np.sqrt(n_p) * (s_tilde / n_p - k) / np.sqrt(var_adj)
    return DeltaResult(
        delta=float(delta), p_delta=float(2.0 * stats.norm.sf(abs(delta))),
        delta_adj=float(delta_adj),
        p_delta_adj=float(2.0 * stats.norm.sf(abs(delta_adj))),
        s_tilde=float(s_tilde), k=k,
        inputs={"N": n_p, "T": t_eff, "k": k},
        tested=tuple(fit.columns[j] for j in tested))


# ---------------------------------------------------------------------------
# loading-sum comparison between regime groups
# ---------------------------------------------------------------------------

def loading_sum_test(fit: FitResult, group_a, group_b) -> TestReport:
    """One-sided test that group A's summed MG loadings exceed group B's.

    When every participating unit identifies both groups, the variance
    comes from the per-unit differences of the two coefficient sums
    (paired form).  When the two groups are identified on disjoint unit
    sets (static regime membership), the independent two-sample form is
    used; the report's details say which.
    """
    if fit.per_unit is None or fit.mg is None:
        raise SpecificationError("loading_sum_test needs an MG fit")
    idx_a = _resolve_columns(fit, group_a)
    idx_b = _resolve_columns(fit, group_b)
    if len(idx_a) != len(idx_b) or not idx_a:
        raise SpecificationError("group selectors must pick equally many columns")

    def retains(country, idx):
        dropped = set(fit.per_unit[country].dropped)
        return not (dropped & set(idx))

    paired = [c for c in fit.countries if retains(c, idx_a) and retains(c, idx_b)]
    sum_a = float(np.sum(fit.mg.mean[idx_a]))
    sum_b = float(np.sum(fit.mg.mean[idx_b]))
    n, t_eff = fit.sample.n_countries, fit.sample.n_periods

    scale = max(1.0, abs(sum_a), abs(sum_b))
    if len(paired) >= 2:
        diffs = np.array([
            float(np.sum(fit.per_unit[c].coefficients[idx_a])
                  - np.sum(fit.per_unit[c].coefficients[idx_b]))
            for c in paired])
        m = len(paired)
        se2 = float(np.sum((diffs - diffs.mean()) ** 2)) / (m * (m - 1))
        if se2 <= (1e-10 * scale) ** 2:
            raise DegenerateVarianceError("per-unit loading-sum differences have zero dispersion")
        mode = "paired"
        se = np.sqrt(se2)
    else:
        only_a = [c for c in fit.countries if retains(c, idx_a) and not retains(c, idx_b)]
        only_b = [c for c in fit.countries if retains(c, idx_b) and not retains(c, idx_a)]
        if len(only_a) < 2 or len(only_b) < 2:
            raise SpecificationError(
                "groups are identified on neither a common nor two disjoint unit sets")

        def group_se2(countries, idx):
            sums = np.array([float(np.sum(fit.per_unit[c].coefficients[idx]))
                             for c in countries])
            m = len(countries)
            return float(np.sum((sums - sums.mean()) ** 2)) / (m * (m - 1))

        se2 = group_se2(only_a, idx_a) + group_se2(only_b, idx_b)
        if se2 <= (1e-10 * scale) ** 2:
            raise DegenerateVarianceError("loading sums have zero dispersion in both groups")
        mode = "two-sample"
        se = np.sqrt(se2)

    statistic = (sum_a - sum_b) / se
    p = stats.norm.sf(statistic)
    return TestReport(
        name="loading-sum", statistic=float(statistic), p_value=float(p),
        null_description="sum of group-A loadings <= group B (one-sided upper normal)",
        inputs={"N": n, "T": t_eff, "k": len(idx_a)},
        details={"sum_a": sum_a, "sum_b": sum_b, "se": float(se), "mode": mode})


def mg_wald_test(fit: FitResult, subset) -> TestReport:
    """Joint significance of a set of MG coefficient means.

    Wald statistic on the means with the nonparametric MG covariance,
    referred to chi-square; the reported statistic is scaled by 1/k so it
    reads like an F statistic.
    """
    if fit.per_unit is None or fit.mg is None:
        raise SpecificationError("mg_wald_test needs an MG fit")
    idx = _resolve_columns(fit, subset)
    if not idx:
        raise SelectorError("empty test subset")
    k = len(idx)
    units = [c for c in fit.countries
             if not (set(fit.per_unit[c].dropped) & set(idx))]
    if len(units) < 2:
        raise SelectorError("tested columns retained in fewer than 2 units")
    b = np.array([fit.per_unit[c].coefficients[idx] for c in units])
    n = len(units)
    mean = b.mean(axis=0)
    dev = b - mean
    cov = dev.T @ dev / (n * (n - 1))
    try:
        wald = float(mean @ np.linalg.solve(cov, mean))
    except np.linalg.LinAlgError as exc:
        raise DegenerateVarianceError(f"MG covariance is singular: {exc}") from exc
    p = float(stats.chi2.sf(wald, df=k))
    return TestReport(
        name="mg-wald", statistic=wald / k, p_value=p,
        null_description="all selected MG means are zero (Wald/k vs chi-square)",
        inputs={"N": n, "T": fit.sample.n_periods, "k": k},
        details={"wald": wald})
