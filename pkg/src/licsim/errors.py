"""Exception types shared across the package."""


class LicError(Exception):
    """Base class for all licsim errors."""


class InvalidInputError(LicError, ValueError):
    pass


class InvalidStateError(LicError, ValueError):
    pass


class InsufficientDataError(LicError, ValueError):
    pass


class OutOfRangeError(LicError, ValueError):
    pass


class SingularFitError(LicError, ValueError):
    pass


class InfeasibleSpecError(LicError, ValueError):
    pass


class DegenerateModelError(LicError, RuntimeError):
    pass


class MalformedDataError(InvalidInputError):
    """Unparseable input data file (bad row, missing column, bad sidecar)."""
