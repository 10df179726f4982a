class GraftError(Exception):
    """Base class for input and configuration problems (CLI exit code 1)."""


class SchemaError(GraftError):
    pass


class ParseError(GraftError):
    pass


class ValidationError(GraftError):
    pass


class ConfigurationError(GraftError):
    pass


class NumericError(ArithmeticError):
    """Numerical failure during fitting or evaluation (CLI exit code 2)."""
