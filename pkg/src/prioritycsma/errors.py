"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid scenario, graph or model configuration."""


class ConnectivityError(ConfigError):
    """Interference graph is not connected."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class InsufficientDataError(ValueError):
    """Too few observations for an estimator."""


class OracleFailure(AssertionError):
    """An independent oracle disagreed with the computed result."""
