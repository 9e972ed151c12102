"""Exception hierarchy shared by all navslip modules."""


class NavSlipError(Exception):
    """Base class for every error raised by navslip."""


class InfeasibleResolutionError(NavSlipError, ValueError):
    pass


class MeshingError(NavSlipError):
    pass


class NonTangentialInputError(NavSlipError, ValueError):
    pass


class NormalTraceError(NavSlipError, ValueError):
    pass


class NegativeSlipError(NavSlipError, ValueError):
    pass


class InconsistentChartError(NavSlipError, ValueError):
    pass


class SingularOperatorError(NavSlipError):
    pass


class SolverError(NavSlipError):
    """Linear or eigen solver failed to reach the requested accuracy."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class StepFailureError(NavSlipError):
    def __init__(self, message, time):
        super().__init__(f"{message} (t = {time:.17g})")
        self.time = time


class DivergenceAlarm(StepFailureError):
    pass


class SupportViolationError(NavSlipError, ValueError):
    pass


class SpanDeficiencyError(NavSlipError, ValueError):
    pass


class DegenerateFitError(NavSlipError):
    pass


class ConfigError(NavSlipError, ValueError):
    pass


class MissingColumnError(NavSlipError, KeyError):
    pass
