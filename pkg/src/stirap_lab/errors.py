"""Exception hierarchy shared by all stirap_lab modules."""


class StirapLabError(Exception):
    """Base class for toolkit errors."""


class ConfigurationError(StirapLabError, ValueError):
    """A scheme, schedule or scenario config is inconsistent or incomplete."""


class NumericInputError(StirapLabError, ValueError):
    """A non-finite number reached an operation that needs finite input."""


class OrderingError(ConfigurationError):
    """Pulse ordering request contradicts the builder (e.g. non-positive delay)."""


class StiffnessError(StirapLabError, RuntimeError):
    """The adaptive integrator could not make progress.

    Attributes
    ----------
    t : float
        Evolution coordinate at which the step size underflowed.
    """

    def __init__(self, message, t):
        super().__init__(message)
        self.t = t


class UnsupportedAnalysisError(StirapLabError, ValueError):
    """The requested analysis does not apply to the given scheme or model."""


class UndefinedAngleError(StirapLabError, ValueError):
    """Mixing angle requested where both pump and Stokes couplings vanish."""
