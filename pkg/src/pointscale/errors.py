"""Exception hierarchy shared across the package.

Data problems (bad files, inconsistent shapes/schedules) raise
:class:`DataError`; numeric breakdowns (non-finite values, failed
convergence where a result is required) raise :class:`NumericError`.
The CLI maps these onto distinct exit codes.
"""


class PointScaleError(Exception):
    """Base class for package-specific errors."""


class DataError(PointScaleError):
    """Invalid or inconsistent input data."""


class NumericError(PointScaleError):
    """A computation produced non-finite values or failed numerically."""
