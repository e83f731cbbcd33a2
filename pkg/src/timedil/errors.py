"""Exception hierarchy shared by every module."""


class TimedilError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(TimedilError, ValueError):
    pass


class BoundsError(TimedilError, IndexError):
    pass


class ShapeError(TimedilError, ValueError):
    """A layer precondition on shapes is violated.

    ``layer_index`` names the first failing layer when the error comes from
    whole-network shape inference.
    """

    def __init__(self, message, layer_index=None):
        self.detail = message
        if layer_index is not None:
            message = f"layer {layer_index}: {message}"
        super().__init__(message)
        self.layer_index = layer_index


class InputTooShortError(ShapeError):
    pass


class UnsupportedFeatureError(TimedilError, ValueError):
    pass


class AlreadyDenseError(TimedilError, ValueError):
    pass


class NetworkSyntaxError(TimedilError, ValueError):
    def __init__(self, message, line, column):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class NetworkSemanticError(ShapeError):
    pass
