"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError (and subclasses) exit 1,
NumericError (and subclasses) exit 2.
"""


class ConfigError(ValueError):
    """Invalid configuration, CLI arguments, or input files."""


class IngestionError(ConfigError):
    """Malformed or inconsistent market data files."""


class ShapeError(ValueError):
    """Tensor shapes incompatible with the requested operation."""


class ContractError(ValueError):
    """An API precondition was violated (wrong call order, missing state)."""


class NumericError(ArithmeticError):
    """Non-finite values or degenerate numerical states at runtime."""


class DegenerateSliceError(NumericError):
    """A reduction slice carries no usable information (all-masked, zero variance)."""
