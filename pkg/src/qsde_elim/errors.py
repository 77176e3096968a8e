"""Exception hierarchy shared by all modules."""


class QSDEError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(QSDEError, ValueError):
    pass


class ParameterError(QSDEError, ValueError):
    pass


class CapacityError(QSDEError, ValueError):
    pass


class SingularityError(QSDEError, ArithmeticError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class PreconditionError(QSDEError, ValueError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class AmbiguityError(QSDEError, ValueError):
    """Evaluation requested exactly at a discontinuity of a regulated function."""


class DivergenceError(QSDEError, ArithmeticError):
    pass


class AccuracyError(QSDEError, ArithmeticError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class NumericError(QSDEError, ArithmeticError):
    pass


class ConfigError(QSDEError, ValueError):
    pass
