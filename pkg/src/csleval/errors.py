"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Inputs, shapes, or configuration values are invalid."""


class IntractableModelError(ValidationError):
    """An exact computation would need to enumerate too many states."""


class NumericalError(ArithmeticError):
    """A computation produced a nonfinite intermediate or result."""


class DataFormatError(ValueError):
    """An input file could not be parsed."""
