"""Exception types raised by the filtering library and harness."""


class DimensionError(ValueError):
    """Inputs have inconsistent or unsupported dimensions."""


class InsufficientSamplesError(ValueError):
    """An ensemble operation needs more members than were provided."""


class InvalidInflationError(ValueError):
    """Inflation factor below 1 (deflation is not supported)."""


class NotPositiveDefiniteError(ValueError):
    """A matrix expected to be SPD failed its triangular factorization.

    ``pivot`` is the 1-based index of the leading minor that failed, when
    the factorization reports one.
    """

    def __init__(self, message: str, pivot: int | None = None):
        super().__init__(message)
        self.pivot = pivot


class NotPositiveSemidefiniteError(ValueError):
    """A matrix expected to be PSD has an eigenvalue below tolerance."""

    def __init__(self, message: str, min_eigenvalue: float | None = None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class SingularPointError(ValueError):
    """A measurement model was evaluated where its Jacobian is undefined."""


class InvalidDirectionCosinesError(ValueError):
    """Direction cosines with u^2 + v^2 >= 1 cannot be converted."""


class NoDescentError(RuntimeError):
    """A backtracking line search exhausted its halvings without descent."""


class StalledControllerError(RuntimeError):
    """The adaptive step controller exceeded max rejections at one time."""

    def __init__(self, message: str, pseudo_time: float, rejections: int):
        super().__init__(message)
        self.pseudo_time = pseudo_time
        self.rejections = rejections


class DivergenceError(RuntimeError):
    """Numerical integration produced a non-finite state."""

    def __init__(self, message: str, substep: int | None = None):
        super().__init__(message)
        self.substep = substep


class ConfigError(ValueError):
    """An experiment configuration is malformed or inconsistent."""
