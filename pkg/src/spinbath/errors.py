"""Exception types shared across the package."""


class SpinBathError(Exception):
    """Base class for all package-specific failures."""


class ResourceLimitError(SpinBathError):
    """A requested computation exceeds a hard resource guard."""


class OperatorContractError(SpinBathError):
    """An operator callback violated its contract (e.g. not symmetric)."""


class ConvergenceError(SpinBathError):
    """Iterative solver hit its iteration cap before converging."""

    def __init__(self, message, best_residuals=None):
        super().__init__(message)
        self.best_residuals = best_residuals


class TruncationError(SpinBathError):
    """Low-temperature truncation diagnostic exceeded its bound."""

    def __init__(self, message, diagnostic=None):
        super().__init__(message)
        self.diagnostic = diagnostic


class IntegrationQualityError(SpinBathError):
    """Integrator produced a state outside declared quality bounds."""


class StiffnessError(SpinBathError):
    """Adaptive step size underflowed; problem too stiff for the method."""


class ConfigError(SpinBathError):
    """Invalid or incomplete run configuration."""
