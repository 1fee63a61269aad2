class RiskError(Exception):
    """Base class for every failure raised by the risk library."""


class ConfigError(RiskError, ValueError):
    """Invalid graph, observable, parameter or run configuration."""


class InstabilityError(RiskError, ValueError):
    """Delay violates the stability condition lambda_n * tau < pi / 2."""

    def __init__(self, tau: float, tau_max: float):
        self.tau = tau
        self.tau_max = tau_max
        super().__init__(
            f"Delay tau={tau:.6g} is not below the stability margin tau_max={tau_max:.6g}"
        )


class NumericalError(RiskError, ArithmeticError):
    """Eigensolver, factorization or overflow failure."""
