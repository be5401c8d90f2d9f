"""Exception hierarchy shared across the pipeline.

Every domain failure raised by this package derives from WxError so callers
(CLI, HTTP service) can map them to exit codes / status codes uniformly.
"""


class WxError(Exception):
    """Base class for all domain errors raised by wxcast."""

    code = "error"


# --- ncgrid ---

class UnsupportedFormat(WxError):
    code = "unsupported_format"


class MalformedHeader(WxError):
    code = "malformed_header"


class TruncatedData(WxError):
    code = "truncated_data"


class MissingCoordinates(WxError):
    code = "missing_coordinates"


class UnknownVariable(WxError):
    code = "unknown_variable"


# --- store ---

class AxisMismatch(WxError):
    code = "axis_mismatch"


class EmptyInput(WxError):
    code = "empty_input"


class EmptyStore(WxError):
    code = "empty_store"


class CellOutOfRange(WxError):
    code = "cell_out_of_range"


# --- forecast ---

class NoData(WxError):
    code = "no_data"


class InsufficientYears(NoData):
    code = "insufficient_years"


# --- cluster ---

class NoQualifyingCells(WxError):
    code = "no_qualifying_cells"


class KTooLarge(WxError):
    code = "k_too_large"


class DegenerateFeatures(WxError):
    code = "degenerate_features"


class DimensionMismatch(WxError):
    code = "dimension_mismatch"


# --- recsys ---

class UnknownUser(WxError):
    code = "unknown_user"


class UnknownLocation(WxError):
    code = "unknown_location"


class NonPositiveWeight(WxError):
    code = "non_positive_weight"


# --- router ---

class EmptyGraph(WxError):
    code = "empty_graph"


class NoRoute(WxError):
    code = "no_route"


class NegativePrecip(WxError):
    code = "negative_precip"


# --- render ---

class DegenerateRange(WxError):
    code = "degenerate_range"


class EmptyField(WxError):
    code = "empty_field"


# --- service ---

class FixtureCorrupt(WxError):
    code = "fixture_corrupt"
