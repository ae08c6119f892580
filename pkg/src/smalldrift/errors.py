"""Exception types shared across the package."""


class SmallDriftError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(SmallDriftError):
    """Expression source could not be parsed.

    Carries the byte offset of the failure and a description of what
    was expected there.
    """

    def __init__(self, message: str, source: str, position: int):
        super().__init__(f"{message} (at offset {position} in {source!r})")
        self.source = source
        self.position = position


class EvalError(SmallDriftError):
    """Expression evaluation hit a domain error or a non-finite value."""


class ModelError(SmallDriftError):
    """Model parameters are invalid (bad T, bad eps, coefficients not
    finite at the starting point)."""


class DegenerateModelError(SmallDriftError):
    """The limiting noise scale of the model is numerically zero, so the
    normalized statistic is undefined."""


class BlowupError(SmallDriftError):
    """A solver state became non-finite (or left the guard interval).

    ``time`` is the first grid time at which the state was bad.
    """

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (first bad time {time:g})")
        self.time = time


class DegeneratePathError(SmallDriftError):
    """Observed quadratic variation is numerically zero; the test
    statistic cannot be normalized."""


class InsufficientSampleError(SmallDriftError):
    """A Monte Carlo diagnostic was asked to run with too few paths."""


class DataFormatError(SmallDriftError):
    """An external data file violates the documented format."""


class ExperimentError(SmallDriftError):
    """A Monte Carlo experiment could not produce a trustworthy report
    (for example, too many degenerate replications)."""
