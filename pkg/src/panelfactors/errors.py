"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: configuration/schema problems exit
with 2, estimation failures with 3, and I/O problems with 4.
"""


class PanelFactorsError(Exception):
    """Base class for all package errors."""


# --- data / configuration -------------------------------------------------

class SchemaError(PanelFactorsError):
    """Malformed input schema or run configuration."""


class IngestionError(PanelFactorsError):
    """A CSV cell or period label could not be parsed."""


class TransformError(PanelFactorsError):
    """A panel transform violated its preconditions."""


class InterpolationError(TransformError):
    """A country had too few observations to interpolate."""

    def __init__(self, countries):
        self.countries = tuple(countries)
        super().__init__(
            "linear interpolation needs >= 2 observed values per country; "
            "failing countries: " + ", ".join(self.countries)
        )


class MissingDataError(PanelFactorsError):
    """An operation hit a missing cell; interpolate/balance first."""


class BalanceError(PanelFactorsError):
    """Residual missingness after balancing; carries the cell listing."""

    def __init__(self, cells):
        # cells: list of (country, period_label, variable)
        self.cells = list(cells)
        counts = {}
        for country, _, _ in self.cells:
            counts[country] = counts.get(country, 0) + 1
        per_country = ", ".join(f"{c}: {n}" for c, n in sorted(counts.items()))
        listing = "; ".join(f"({c}, {p}, {v})" for c, p, v in self.cells[:50])
        more = "" if len(self.cells) <= 50 else f" ... and {len(self.cells) - 50} more"
        super().__init__(
            f"panel is not balanced; missing cells per country: {per_country}; "
            f"cells: {listing}{more}"
        )


# --- estimation -----------------------------------------------------------

class EstimationError(PanelFactorsError):
    """Base class for regression failures."""


class InsufficientObservationsError(EstimationError):
    """Fewer usable observations than design columns."""


class DegenerateRegressionError(EstimationError):
    """The dependent variable has zero variance."""


class SpecificationError(EstimationError):
    """Model specification inconsistent with the panel or a fit."""


class UnitRegressionError(EstimationError):
    """One or more unit regressions failed; lists the failing units."""

    def __init__(self, failures):
        # failures: dict country -> exception
        self.failures = dict(failures)
        detail = "; ".join(f"{c}: {e}" for c, e in self.failures.items())
        super().__init__(f"unit regressions failed for {detail}")


# --- diagnostics ----------------------------------------------------------

class DiagnosticsError(PanelFactorsError):
    """Base class for test failures."""


class DegenerateRowError(DiagnosticsError):
    """A residual row has zero variance; names the unit."""


class DegenerateVarianceError(DiagnosticsError):
    """Zero dispersion where a variance estimate is required."""


class SelectorError(DiagnosticsError):
    """A coefficient selector referenced unavailable columns."""


# --- factors --------------------------------------------------------------

class FactorError(PanelFactorsError):
    """Base class for eigen-analysis failures."""


class DegenerateSpectrumError(FactorError):
    """The input matrix is identically zero."""


class RankError(FactorError):
    """Requested more components than the effective rank."""

    def __init__(self, requested, effective_rank):
        self.requested = requested
        self.effective_rank = effective_rank
        super().__init__(
            f"requested {requested} components but effective rank is {effective_rank}"
        )


# --- pipeline / simulation ------------------------------------------------

class PipelineHaltError(PanelFactorsError):
    """Strong dependence remained after step 1 under strict mode."""


class AlignmentError(PanelFactorsError):
    """Benchmark columns did not share one estimation sample."""


class ConfigurationError(PanelFactorsError):
    """Invalid simulation or run configuration."""


class MonteCarloError(EstimationError):
    """Too many replications failed; carries the recorded failures."""

    def __init__(self, failures, reps):
        self.failures = list(failures)
        super().__init__(
            f"{len(self.failures)} of {reps} replications failed (> 5%); "
            f"first failure: {self.failures[0]}"
        )
