"""Exception hierarchy shared across the package."""


class AircovError(Exception):
    """Base class for all package errors."""


class InvalidInputError(AircovError):
    """An argument violates a documented precondition."""


class DegenerateGeometryError(AircovError):
    """Sample point coincides with the antenna (no bearing is defined)."""


class ShapeError(AircovError):
    """Array dimensions do not match the expected layout."""


class ParseError(AircovError):
    """A data file row could not be parsed; message carries the row number."""


class IntegrityError(AircovError):
    """Table-level consistency violation, e.g. duplicate station ids."""


class InvalidSplitError(AircovError):
    """A requested train/val/test partition cannot be formed."""


class ConvergenceError(AircovError):
    """An iterative solver exhausted its iteration budget."""


class NotFittedError(AircovError):
    """An encoding or model was used before being fitted."""


class OutOfBoundsError(AircovError):
    """A queried location lies outside the raster extent."""
