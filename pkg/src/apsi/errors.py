"""Exception and warning types shared by all modules."""


class ApsiError(Exception):
    """Base class for all errors raised by the package."""


class InvalidArgument(ApsiError, ValueError):
    pass


class OutOfBandError(InvalidArgument):
    """A frequency at or above the Nyquist limit of a record was requested."""


class RefinementFailed(ApsiError):
    def __init__(self, seed_omega, message=None):
        self.seed_omega = seed_omega
        super().__init__(message or f"peak refinement failed near omega={seed_omega!r}")


class DecorrelationFailed(ApsiError):
    def __init__(self, residual):
        self.residual = tuple(residual)
        freqs = ", ".join(f"{w:.6g}" for w in self.residual)
        super().__init__(f"conditional sets still overlap at: {freqs}")


class GenerationFailed(ApsiError):
    pass


class EstimationFailed(ApsiError):
    pass


class FitFailed(ApsiError):
    def __init__(self, message, condition=None):
        self.condition = condition
        super().__init__(message)


class NoCommonSupportWarning(UserWarning):
    """Input and output frequency sets share no exact-signal frequency."""


class AnalysisWarning(UserWarning):
    pass
