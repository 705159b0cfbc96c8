class GenscoreError(Exception):
    """Base class for all package errors."""


class DomainError(GenscoreError, ValueError):
    """A point is outside its domain or a domain description is invalid."""


class UnsupportedDomainError(DomainError):
    """The requested operation has no closed form for this domain shape."""


class RootIsolationError(DomainError):
    """A polynomial restriction could not be solved for its real roots."""


class BoundarySingularityError(GenscoreError, ValueError):
    """A data point sits on the component-wise boundary where h' is infinite."""


class SingularMatrixError(GenscoreError, ValueError):
    pass


class SamplerError(GenscoreError, RuntimeError):
    pass


class ConvergenceWarning(UserWarning):
    pass
