"""Exception types shared across the package."""


class RwRobustError(Exception):
    """Base class for all errors raised by this package."""


class InvariantViolation(RwRobustError, ValueError):
    """A constructed object violates one of its structural invariants."""


class DegenerateCovarianceError(RwRobustError, ValueError):
    """Covariance matrix has zero or negative trace and cannot be normalized."""


class LayoutError(RwRobustError, ValueError):
    """Feature layout mismatch between a model, a point, or a dataset."""


class DataFormatError(RwRobustError, ValueError):
    """Malformed input data; the message names the offending row and column."""


class ExternalModelError(RwRobustError, RuntimeError):
    """External model process crashed, timed out, or broke the line protocol.

    ``line_no`` is the 1-based index of the protocol line being processed
    when the failure occurred, if known.
    """

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"{message} (protocol line {line_no})"
        super().__init__(message)
        self.line_no = line_no


class NoCounterfactualsError(RwRobustError, RuntimeError):
    """No counterfactual search converged, so scores cannot be normalized."""


class EstimationError(RwRobustError, RuntimeError):
    """Robustness estimation failed for a specific test point."""

    def __init__(self, point_index, cause):
        super().__init__(f"estimation failed for point {point_index}: {cause}")
        self.point_index = point_index
        self.cause = cause
