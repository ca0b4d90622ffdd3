"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`ClusterConquerError`, so callers can catch one base class.
Errors that describe bad argument values also derive from ``ValueError``.
"""


class ClusterConquerError(Exception):
    """Base class for all package errors."""


class FormatError(ClusterConquerError, ValueError):
    """Malformed input file (ragged CSV, corrupt model file, ...)."""


class ParseError(FormatError):
    """A cell that should be numeric could not be parsed."""


class MissingDataError(ClusterConquerError, ValueError):
    """NaN or empty cell in a dataset."""


class EmptyPlanError(ClusterConquerError, ValueError):
    """Block plan with no usable sample points."""


class DuplicateSeriesError(ClusterConquerError, ValueError):
    """A series index was listed twice."""


class ShapeError(ClusterConquerError, ValueError):
    """Array dimensions do not agree."""


class RankError(ClusterConquerError, ValueError):
    """Requested rank / number of components is out of range."""


class ClusterCountError(ClusterConquerError, ValueError):
    """More clusters requested than there are points."""


class WeightError(ClusterConquerError, ValueError):
    """Negative sample weight."""


class SingularDesignError(ClusterConquerError, ValueError):
    """Design covariance is singular where an inverse is required."""


class VersionError(ClusterConquerError):
    """Model file written by an unsupported format version."""


class ArgumentError(ClusterConquerError, ValueError):
    """Invalid argument value (horizon < 1, trials = 0, ...)."""
