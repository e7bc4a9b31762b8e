"""Exception hierarchy.

Every error carries a short machine-readable ``category`` that the command
line reports alongside its exit status.
"""


class FountainError(Exception):
    category = "error"


class ConfigurationError(FountainError, ValueError):
    """Bad stack/schedule/config content (unknown electrode, missing field...)."""

    category = "configuration"

    def __init__(self, message, path=None):
        super().__init__(message if path is None else f"{path}: {message}")
        self.path = path


class InvalidModelError(ConfigurationError):
    category = "invalid-model"


class DegenerateCalibrationError(FountainError, ValueError):
    category = "degenerate-calibration"


class InvalidScheduleError(ConfigurationError):
    category = "invalid-schedule"


class NumericalBlowupError(FountainError, ArithmeticError):
    """Raised when the integrator produces a non-finite acceleration.

    ``last_state`` holds the last finite :class:`~ionfountain.dynamics.IonState`.
    """

    category = "numerical-blowup"

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class NotReflectedError(FountainError):
    category = "not-reflected"


class InvalidEnergyError(FountainError, ValueError):
    category = "invalid-energy"


class WindowNotFoundError(FountainError):
    category = "window-not-found"


class CalibrationFailedError(FountainError):
    """Calibration did not converge; ``best`` holds the best result so far."""

    category = "calibration-failed"

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
