"""Exception hierarchy shared by every module."""


class BlowupError(Exception):
    """Base class for all typed failures raised by the library."""


class EmptyPart(BlowupError, ValueError):
    pass


class NotInC(BlowupError, ValueError):
    pass


class TooLargeForExhaustive(BlowupError):
    pass


class PreconditionFailed(BlowupError, ValueError):
    pass


class EtaPreconditionFailed(PreconditionFailed):
    pass


class NoExtensions(BlowupError):
    pass


class DensityTooLow(BlowupError, ValueError):
    pass


class NotEnoughCliques(BlowupError):
    pass


class RetriesExhausted(BlowupError):
    pass


class ReductionFailed(BlowupError):
    pass


class RegularityNotCertified(BlowupError):
    pass


class ParseError(BlowupError, ValueError):
    pass


class BadParams(BlowupError, ValueError):
    pass


class InvariantViolation(BlowupError, AssertionError):
    """A property that holds by construction was observed to fail (a bug)."""


class Degenerate(BlowupError):
    """The requested object has order zero at this scale.

    ``partial`` optionally carries whatever was computed before giving up.
    """

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial
