"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class MPUError(Exception):
    exit_code = 1


class ConfigError(MPUError, ValueError):
    exit_code = 2


class ParameterError(ConfigError):
    """Ensemble or operation parameters that cannot satisfy their constraints."""


class DataError(MPUError, ValueError):
    exit_code = 3


class DomainError(MPUError, ValueError):
    """Argument outside the mathematical domain of an operation."""
    exit_code = 4


class DegenerateInputError(DomainError):
    pass


class StateError(MPUError, RuntimeError):
    """Operation needs data the object was built without (e.g. eigenvectors)."""
    exit_code = 4


class NumericalError(MPUError, ArithmeticError):
    exit_code = 4


class FitError(NumericalError):
    pass


class PreconditionError(MPUError, ValueError):
    exit_code = 2
