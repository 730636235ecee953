"""Exception hierarchy shared by every module."""


class ClassGenError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(ClassGenError, ValueError):
    pass


class InfiniteDivergenceError(ClassGenError, ArithmeticError):
    """KL divergence is +inf because p puts mass where q has none."""


class InsufficientSamplesError(ClassGenError):
    pass


class EmptyClassError(ClassGenError):
    """Requested class (or attribute value) has no examples to condition on."""


class UnsupportedError(ClassGenError):
    pass


class LoadError(ClassGenError):
    """Dataset or config file could not be parsed.

    ``line`` is the 1-based line number of the offending row when known.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
