"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class MultisensError(Exception):
    """Base class for all errors raised by multisens."""


class ConfigurationError(MultisensError, ValueError):
    """Invalid parameters, inconsistent wiring or a malformed run config."""


class DegenerateModelError(MultisensError):
    """The model output has zero (or negative estimated) variance."""


class InconsistentMomentsError(MultisensError):
    """Moment estimates violate an identity they must satisfy (e.g. Cauchy-Schwarz)."""


class EvaluationError(MultisensError):
    """A model produced a non-finite value."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class IntegrationError(EvaluationError):
    """A time integrator became unstable."""
