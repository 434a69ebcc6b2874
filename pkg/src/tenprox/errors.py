"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Shapes or mode indices are incompatible."""


class ParameterError(ValueError):
    """A scalar parameter is outside its admissible range."""


class NumericalError(RuntimeError):
    """A dense linear-algebra kernel failed (e.g. SVD non-convergence)."""


class DivergenceError(RuntimeError):
    """An iteration produced non-finite values or blew up.

    The partial iteration history, when available, is attached as
    ``history``.
    """

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history if history is not None else []
