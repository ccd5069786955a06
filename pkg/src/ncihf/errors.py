"""Exception types raised by the solver stack."""


class NcihfError(Exception):
    """Base class for all package errors."""


class PoleError(NcihfError):
    """Argument lies within tolerance of a kernel pole."""


class DegenerateArguments(NcihfError):
    """Arguments violate a non-degeneracy precondition (e.g. a == b)."""


class SingularSystem(NcihfError):
    """Constraint linear system is numerically singular."""

    def __init__(self, message, condition_number=float("inf")):
        super().__init__(message)
        self.condition_number = condition_number


class ConjugacyViolation(NcihfError):
    """The two halves of the stacked solution are not complex conjugates."""


class DegenerateSpin(NcihfError):
    """A spin has vanishing s* . s, so the pole velocity is undefined."""


class StripExit(NcihfError):
    """A pole left its admissible strip during integration."""

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class StepFailure(NcihfError):
    """The adaptive step controller underflowed."""


class NotSeparated(NcihfError):
    """Solitons are too close for asymptotic diagnostics."""


class WindowTooSmall(NcihfError):
    """Sampling window does not extend far enough beyond the poles."""


class ConfigError(NcihfError):
    """Scenario configuration failed validation."""
