class ChaoscastError(Exception):
    """Base class for errors raised by this package."""


class ConfigurationError(ChaoscastError, ValueError):
    pass


class DivergenceError(ChaoscastError, ArithmeticError):
    pass


class NumericalError(ChaoscastError, ArithmeticError):
    pass
