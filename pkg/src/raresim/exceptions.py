class RareSimError(Exception):
    """Base class for all errors raised by raresim."""


class ValidationError(RareSimError, ValueError):
    pass


class DuplicateEntryError(RareSimError, KeyError):
    pass


class NotFoundError(RareSimError, LookupError):
    pass


class NoUniqueSteadyStateError(RareSimError, ArithmeticError):
    pass


class StepSizeError(RareSimError, ArithmeticError):
    pass


class NoSplittingError(RareSimError):
    """Fewer than two transmission peaks could be resolved."""


class BracketError(RareSimError):
    pass


class BandwidthError(RareSimError):
    """Signal is too fast for the quasi-static approximation."""


class CalibrationError(RareSimError):
    pass


class AliasingError(RareSimError, ValueError):
    pass


class OrthogonalityError(RareSimError, ValueError):
    pass


class RankError(RareSimError, ArithmeticError):
    pass


class DegenerateError(RareSimError, ValueError):
    pass


class ModelDomainError(RareSimError, ValueError):
    pass


class TopologyError(RareSimError, ValueError):
    pass


class ConfigError(RareSimError):
    pass
