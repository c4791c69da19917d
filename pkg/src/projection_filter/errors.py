"""Exception types shared across the package."""


class StructuralError(ValueError):
    """Shapes, dimensions or indices do not fit together."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class CapabilityError(ValueError):
    """The request is valid in principle but beyond what is implemented or configured."""


class AssumptionError(ValueError):
    """The model/statistics pair violates the polynomial filter assumptions."""


class IntegrabilityError(ArithmeticError):
    """The log-partition function is not finite at the requested parameters."""

    def __init__(self, message, theta=None):
        super().__init__(message)
        self.theta = theta


class SingularFisherError(ArithmeticError):
    """The Fisher matrix could not be factorized even with maximal jitter."""


class StepFailure(RuntimeError):
    """A filter step produced an unusable state."""

    def __init__(self, message, step=None, theta=None):
        super().__init__(message)
        self.step = step
        self.theta = theta


class NumericalInstabilityError(ArithmeticError):
    pass


class DegeneracyError(ArithmeticError):
    """All particle weights vanished."""


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, message, field=None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field
