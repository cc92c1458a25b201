# remede/errors.py


class RemedeError(Exception):
    """Base class for library errors."""


class ShapeError(RemedeError, ValueError):
    pass


class GradientError(RemedeError, RuntimeError):
    pass


class DivergenceError(RemedeError, RuntimeError):
    pass


class DatasetFormatError(RemedeError, ValueError):
    pass
