"""Balanced-panel container and the deterministic data transforms.

A :class:`Panel` holds country-level series as N x T matrices and common
(global) series once, as T-vectors.  Missingness is tracked by boolean
masks; masked cells also hold NaN so that accidental use fails loudly.
Panels are immutable: every transform returns a new instance.

Periods are quarters encoded as integers ``year*4 + (quarter-1)`` and
parsed from/formatted to ``YYYYqQ`` labels.  No calendar semantics are
involved.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import (
    BalanceError,
    IngestionError,
    InterpolationError,
    MissingDataError,
    SchemaError,
    TransformError,
)

_PERIOD_RE = re.compile(r"^(\d{4})q([1-4])$", re.IGNORECASE)


def parse_period(label: str) -> int:
    """Parse a ``YYYYqQ`` label into an integer quarter index."""
    m = _PERIOD_RE.match(str(label).strip())
    if m is None:
        raise IngestionError(f"period {label!r} is not of the form YYYYqQ")
    year, quarter = int(m.group(1)), int(m.group(2))
    return year * 4 + (quarter - 1)


def format_period(index: int) -> str:
    """Format an integer quarter index back to ``YYYYqQ``."""
    return f"{index // 4}q{index % 4 + 1}"


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for :func:`load_csv`.

    ``variables`` are country-specific columns (stored N x T); ``common``
    are global series replicated across rows in the file and stored once.
    ``rename`` maps CSV column names to panel variable names.
    """

    variables: tuple[str, ...]
    common: tuple[str, ...] = ()
    country: str = "country"
    period: str = "period"
    rename: Mapping[str, str] = field(default_factory=dict)

    def panel_name(self, column: str) -> str:
        return self.rename.get(column, column)


@dataclass(frozen=True)
class TransformSpec:
    """One deterministic transform: ``kind`` applied to ``source`` -> ``target``.

    Kinds: ``lag`` (order ``k``), ``diff``, ``log``, ``standardize``,
    ``interpolate-linear``, ``real-rate-combine``.  The last one takes
    ``source=(nominal, price_index)`` and produces
    ``nominal - 4 * diff(log(price_index))``.
    """

    kind: str
    source: str | tuple[str, str]
    target: str
    k: int = 1
    replace: bool = False

    _KINDS = ("lag", "diff", "log", "standardize", "interpolate-linear", "real-rate-combine")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise SchemaError(f"unknown transform kind {self.kind!r}; expected one of {self._KINDS}")
        if self.kind == "lag" and self.k < 1:
            raise SchemaError("lag order k must be >= 1")
        if self.kind == "real-rate-combine":
            if not (isinstance(self.source, tuple) and len(self.source) == 2):
                raise SchemaError("real-rate-combine needs source=(nominal, price_index)")
        elif not isinstance(self.source, str):
            raise SchemaError(f"transform {self.kind!r} takes a single source variable")


@dataclass(frozen=True)
class Panel:
    """Immutable container of panel data.

    ``values[name]`` is N x T (countries by periods) with NaN at masked
    cells; ``mask[name]`` is the authoritative missingness record.
    ``common[name]`` / ``common_mask[name]`` hold global T-vectors.
    """

    countries: tuple[str, ...]
    periods: tuple[int, ...]
    values: Mapping[str, np.ndarray]
    mask: Mapping[str, np.ndarray]
    common: Mapping[str, np.ndarray] = field(default_factory=dict)
    common_mask: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        n, t = len(self.countries), len(self.periods)
        if len(set(self.countries)) != n:
            raise SchemaError("duplicate country identifiers")
        if len(set(self.periods)) != t:
            raise SchemaError("duplicate period identifiers")
        if list(self.countries) != sorted(self.countries):
            raise SchemaError("countries must be sorted")
        if list(self.periods) != sorted(self.periods):
            raise SchemaError("periods must be sorted")
        for name, arr in self.values.items():
            if arr.shape != (n, t):
                raise SchemaError(f"series {name!r} has shape {arr.shape}, expected {(n, t)}")
        for name, arr in self.common.items():
            if arr.shape != (t,):
                raise SchemaError(f"common series {name!r} has shape {arr.shape}, expected {(t,)}")

    # -- introspection -------------------------------------------------

    @property
    def n_countries(self) -> int:
        return len(self.countries)

    @property
    def n_periods(self) -> int:
        return len(self.periods)

    def period_labels(self) -> tuple[str, ...]:
        return tuple(format_period(p) for p in self.periods)

    def has_variable(self, name: str) -> bool:
        return name in self.values or name in self.common

    def is_common(self, name: str) -> bool:
        if name in self.common:
            return True
        if name in self.values:
            return False
        raise SchemaError(f"unknown variable {name!r}")

    def get(self, name: str) -> np.ndarray:
        """Return the stored array (N x T for country series, T for common)."""
        if name in self.values:
            return self.values[name]
        if name in self.common:
            return self.common[name]
        raise SchemaError(f"unknown variable {name!r}")

    def get_mask(self, name: str) -> np.ndarray:
        if name in self.mask:
            return self.mask[name]
        if name in self.common_mask:
            return self.common_mask[name]
        raise SchemaError(f"unknown variable {name!r}")

    # -- construction helpers ------------------------------------------

    def with_series(self, name: str, data: np.ndarray, miss: np.ndarray,
                    common: bool = False, replace_existing: bool = False) -> "Panel":
        """Return a new panel with ``name`` added (or replaced)."""
        if self.has_variable(name) and not replace_existing:
            raise TransformError(f"target {name!r} already exists; pass replace to overwrite")
        data = np.array(data, dtype=float)
        miss = np.array(miss, dtype=bool)
        data = data.copy()
        data[miss] = np.nan
        if common:
            new_common = dict(self.common)
            new_cmask = dict(self.common_mask)
            new_common[name] = data
            new_cmask[name] = miss
            values, mask = dict(self.values), dict(self.mask)
            values.pop(name, None)
            mask.pop(name, None)
            return replace(self, values=values, mask=mask,
                           common=new_common, common_mask=new_cmask)
        new_values = dict(self.values)
        new_mask = dict(self.mask)
        new_values[name] = data
        new_mask[name] = miss
        common_d, cmask_d = dict(self.common), dict(self.common_mask)
        common_d.pop(name, None)
        cmask_d.pop(name, None)
        return replace(self, values=new_values, mask=new_mask,
                       common=common_d, common_mask=cmask_d)

    def restrict(self, start: int, end: int) -> "Panel":
        """Restrict to periods in [start, end] (integer quarter indices)."""
        keep = [i for i, p in enumerate(self.periods) if start <= p <= end]
        if not keep:
            raise SchemaError(
                f"window {format_period(start)}..{format_period(end)} selects no periods"
            )
        idx = np.asarray(keep)
        return Panel(
            countries=self.countries,
            periods=tuple(self.periods[i] for i in keep),
            values={k: v[:, idx] for k, v in self.values.items()},
            mask={k: v[:, idx] for k, v in self.mask.items()},
            common={k: v[idx] for k, v in self.common.items()},
            common_mask={k: v[idx] for k, v in self.common_mask.items()},
        )


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------

def load_csv(path, schema: CsvSchema) -> Panel:
    """Load a long-format CSV (one row per country-period) into a Panel.

    Empty cells are missing.  Duplicate (country, period) pairs and
    unparseable numeric cells are errors; ragged time coverage is allowed
    and resolved later by :func:`balance`.
    """
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    needed = [schema.country, schema.period, *schema.variables, *schema.common]
    missing_cols = [c for c in needed if c not in frame.columns]
    if missing_cols:
        raise SchemaError(f"CSV is missing columns: {missing_cols}")

    period_idx = np.array([parse_period(p) for p in frame[schema.period]])
    country_col = frame[schema.country].to_numpy()

    pairs = list(zip(country_col, period_idx))
    if len(set(pairs)) != len(pairs):
        seen, dup = set(), None
        for pr in pairs:
            if pr in seen:
                dup = pr
                break
            seen.add(pr)
        raise SchemaError(
            f"duplicate (country, period) pair: ({dup[0]}, {format_period(dup[1])})"
        )

    countries = tuple(sorted(set(country_col)))
    periods = tuple(sorted(set(period_idx.tolist())))
    n, t = len(countries), len(periods)
    crow = {c: i for i, c in enumerate(countries)}
    pcol = {p: j for j, p in enumerate(periods)}
    rows = np.array([crow[c] for c in country_col])
    cols = np.array([pcol[p] for p in period_idx])

    def parse_column(column: str) -> np.ndarray:
        raw = frame[column].str.strip()
        parsed = pd.to_numeric(raw, errors="coerce")
        bad = parsed.isna() & (raw != "")
        if bad.any():
            i = int(np.flatnonzero(bad.to_numpy())[0])
            raise IngestionError(
                f"cell at row {i + 2}, column {column!r} is not numeric: {raw.iloc[i]!r}"
            )
        return parsed.to_numpy(dtype=float)  # NaN where empty

    values: dict[str, np.ndarray] = {}
    mask: dict[str, np.ndarray] = {}
    for column in schema.variables:
        name = schema.panel_name(column)
        grid = np.full((n, t), np.nan)
        grid[rows, cols] = parse_column(column)
        values[name] = grid
        mask[name] = np.isnan(grid)

    common: dict[str, np.ndarray] = {}
    common_mask: dict[str, np.ndarray] = {}
    for column in schema.common:
        name = schema.panel_name(column)
        grid = np.full((n, t), np.nan)
        grid[rows, cols] = parse_column(column)
        vec = np.full(t, np.nan)
        for j in range(t):
            cell = grid[:, j]
            observed = cell[~np.isnan(cell)]
            if observed.size == 0:
                continue
            spread = observed.max() - observed.min()
            scale = max(abs(observed[0]), 1.0)
            if spread > 1e-9 * scale:
                raise IngestionError(
                    f"common series {name!r} disagrees across countries at "
                    f"{format_period(periods[j])}"
                )
            vec[j] = observed[0]
        common[name] = vec
        common_mask[name] = np.isnan(vec)

    return Panel(countries=countries, periods=periods, values=values, mask=mask,
                 common=common, common_mask=common_mask)


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

def _interpolate_row(row: np.ndarray, miss: np.ndarray) -> tuple[np.ndarray, np.ndarray, bool]:
    """Fill interior gaps of one series affinely; edges stay missing."""
    observed = np.flatnonzero(~miss)
    if observed.size < 2:
        return row, miss, False
    first, last = observed[0], observed[-1]
    inner = np.arange(first, last + 1)
    filled = row.copy()
    filled[inner] = np.interp(inner, observed, row[observed])
    new_miss = miss.copy()
    new_miss[inner] = False
    return filled, new_miss, True


def interpolate_linear(panel: Panel, variable: str) -> Panel:
    """Fill interior missing runs of ``variable`` on the affine path between
    the surrounding observed values.  Leading/trailing gaps are never
    extrapolated; eliminate them via the balance window instead.
    """
    if panel.is_common(variable):
        vec, miss = panel.get(variable), panel.get_mask(variable)
        filled, new_miss, ok = _interpolate_row(vec.copy(), miss)
        if not ok:
            raise InterpolationError(["<common>"])
        return panel.with_series(variable, filled, new_miss, common=True, replace_existing=True)

    data = panel.get(variable).copy()
    miss = panel.get_mask(variable).copy()
    failing = []
    for i, country in enumerate(panel.countries):
        data[i], miss[i], ok = _interpolate_row(data[i], miss[i])
        if not ok:
            failing.append(country)
    if failing:
        raise InterpolationError(failing)
    return panel.with_series(variable, data, miss, replace_existing=True)


def _shift_later(arr: np.ndarray, miss: np.ndarray, k: int):
    out = np.full_like(arr, np.nan)
    out_miss = np.ones_like(miss)
    out[..., k:] = arr[..., :-k]
    out_miss[..., k:] = miss[..., :-k]
    return out, out_miss


def apply_transform(panel: Panel, spec: TransformSpec) -> Panel:
    """Apply one :class:`TransformSpec`, returning a new panel."""
    if panel.has_variable(spec.target) and not spec.replace:
        raise TransformError(f"target {spec.target!r} already exists; set replace=True")

    if spec.kind == "interpolate-linear":
        interpolated = interpolate_linear(panel, spec.source)
        if spec.target == spec.source:
            return interpolated
        return interpolated.with_series(
            spec.target, interpolated.get(spec.source), interpolated.get_mask(spec.source),
            common=interpolated.is_common(spec.source), replace_existing=spec.replace)

    if spec.kind == "real-rate-combine":
        nominal_name, price_name = spec.source
        if panel.is_common(nominal_name) != panel.is_common(price_name):
            raise TransformError("real-rate-combine sources must both be country or both common")
        is_common = panel.is_common(nominal_name)
        nominal, nominal_miss = panel.get(nominal_name), panel.get_mask(nominal_name)
        price, price_miss = panel.get(price_name), panel.get_mask(price_name)
        with np.errstate(invalid="ignore", divide="ignore"):
            observed_price = price[~price_miss]
            if np.any(observed_price <= 0):
                raise TransformError(f"real-rate-combine requires strictly positive {price_name!r}")
            logp = np.log(price)
        dlogp = np.full_like(logp, np.nan)
        dlogp[..., 1:] = logp[..., 1:] - logp[..., :-1]
        dmiss = np.ones_like(price_miss)
        dmiss[..., 1:] = price_miss[..., 1:] | price_miss[..., :-1]
        out = nominal - 4.0 * dlogp
        out_miss = nominal_miss | dmiss
        out[out_miss] = np.nan
        return panel.with_series(spec.target, out, out_miss, common=is_common,
                                 replace_existing=spec.replace)

    source = spec.source
    is_common = panel.is_common(source)
    arr, miss = panel.get(source), panel.get_mask(source)

    if spec.kind == "lag":
        if spec.k >= panel.n_periods:
            raise TransformError(f"lag order {spec.k} >= panel length {panel.n_periods}")
        out, out_miss = _shift_later(arr, miss, spec.k)
    elif spec.kind == "diff":
        out = np.full_like(arr, np.nan)
        out[..., 1:] = arr[..., 1:] - arr[..., :-1]
        out_miss = np.ones_like(miss)
        out_miss[..., 1:] = miss[..., 1:] | miss[..., :-1]
    elif spec.kind == "log":
        observed = arr[~miss]
        if np.any(observed <= 0):
            raise TransformError(f"log requires strictly positive input for {source!r}")
        with np.errstate(invalid="ignore"):
            out = np.log(arr)
        out_miss = miss.copy()
    elif spec.kind == "standardize":
        observed = arr[~miss]
        if observed.size < 2:
            raise TransformError(f"standardize needs >= 2 observed cells for {source!r}")
        sd = observed.std(ddof=1)
        if sd == 0:
            raise TransformError(f"standardize of constant series {source!r}")
        out = (arr - observed.mean()) / sd
        out_miss = miss.copy()
    else:  # pragma: no cover - guarded by TransformSpec validation
        raise SchemaError(f"unhandled transform kind {spec.kind!r}")

    out = out.copy()
    out[out_miss] = np.nan
    return panel.with_series(spec.target, out, out_miss, common=is_common,
                             replace_existing=spec.replace)


def apply_transforms(panel: Panel, specs: Iterable[TransformSpec]) -> Panel:
    for spec in specs:
        panel = apply_transform(panel, spec)
    return panel


# ---------------------------------------------------------------------------
# cross-section averages and balancing
# ---------------------------------------------------------------------------

def cross_section_averages(panel: Panel, variables: Sequence[str], lags: int = 0
                           ) -> dict[str, np.ndarray]:
    """Time-t averages across countries of each variable, plus ``lags``
    lagged copies of each average.

    Returns an ordered mapping of T-vectors named ``avg:<var>`` and
    ``avg:<var>(t-l)``; lagged copies carry NaN in their first ``l`` cells.
    All referenced cells must be observed.
    """
    if lags < 0:
        raise SchemaError("lags must be >= 0")
    block: dict[str, np.ndarray] = {}
    for name in variables:
        if panel.is_common(name):
            raise SchemaError(f"{name!r} is a common series; cross-section averages "
                              "apply to country-specific variables")
        miss = panel.get_mask(name)
        if miss.any():
            raise MissingDataError(
                f"variable {name!r} has missing cells; interpolate/balance before "
                "computing cross-section averages"
            )
        avg = panel.get(name).mean(axis=0)
        block[f"avg:{name}"] = avg
        for l in range(1, lags + 1):
            lagged = np.full_like(avg, np.nan)
            lagged[l:] = avg[:-l]
            block[f"avg:{name}(t-{l})"] = lagged
    return block


def balance(panel: Panel, variables: Sequence[str],
            window: tuple[str | int, str | int] | None = None) -> Panel:
    """Restrict to ``window`` and verify the referenced variables are fully
    observed there.  Raises :class:`BalanceError` with the full cell listing
    otherwise.
    """
    if window is not None:
        start, end = window
        start = parse_period(start) if isinstance(start, str) else int(start)
        end = parse_period(end) if isinstance(end, str) else int(end)
        if start > end:
            raise SchemaError("window start is after its end")
        panel = panel.restrict(start, end)

    offending: list[tuple[str, str, str]] = []
    for name in variables:
        if not panel.has_variable(name):
            raise SchemaError(f"unknown variable {name!r}")
        miss = panel.get_mask(name)
        if not miss.any():
            continue
        if panel.is_common(name):
            for j in np.flatnonzero(miss):
                offending.append(("<common>", format_period(panel.periods[j]), name))
        else:
            for i, j in zip(*np.nonzero(miss)):
                offending.append((panel.countries[i],
                                  format_period(panel.periods[j]), name))
    if offending:
        raise BalanceError(offending)
    return panel
