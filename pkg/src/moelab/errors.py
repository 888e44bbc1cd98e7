"""Exception types shared across the package."""


class MoeLabError(Exception):
    """Base class for all moelab errors."""


class ConfigError(MoeLabError, ValueError):
    """Invalid model or hardware configuration."""


class ShapeError(MoeLabError, ValueError):
    """Operands with inconsistent dimensions."""


class NumericError(MoeLabError, ArithmeticError):
    """Non-finite values encountered where finite ones are required."""


class DomainError(MoeLabError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class FitError(MoeLabError, ValueError):
    """Regression input too degenerate to fit."""
