"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid solver or command configuration (bad sample count, transform, ...)."""


class NumericalConsistencyError(ArithmeticError):
    """A quantity that must be real carried a non-negligible imaginary part."""
