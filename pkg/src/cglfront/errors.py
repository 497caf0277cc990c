"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, NumericalError -> 3,
AssumptionError -> 4.
"""


class CglError(Exception):
    """Base class for all package errors."""


class ConfigError(CglError):
    """Malformed or incomplete run configuration."""


class NumericalError(CglError):
    """A numerical procedure failed (divergence, singular solve, no front, ...)."""


class AssumptionError(CglError):
    """A structural assumption on the model is violated (no rest state, A4 fails, ...)."""


class NonHyperbolicError(NumericalError):
    """An equilibrium or limit matrix has eigenvalues on the imaginary axis."""


class NewtonError(NumericalError):
    """Newton iteration did not converge; carries the last residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DecompositionError(NumericalError):
    """Group-orbit decomposition failed (perturbation outside the Newton basin)."""


class NonDecayError(NumericalError):
    """A stability run did not decay; carries the partial trace for diagnosis."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
