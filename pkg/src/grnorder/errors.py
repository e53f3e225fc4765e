"""Exception hierarchy.

Each class carries the CLI exit code it maps to (1 user/config, 2 data,
3 internal invariant).
"""


class GrnOrderError(Exception):
    exit_code = 3


class ConfigurationError(GrnOrderError, ValueError):
    exit_code = 1


class CheckpointError(GrnOrderError):
    exit_code = 1


class DataError(GrnOrderError, ValueError):
    exit_code = 2


class ContractError(GrnOrderError, ValueError):
    """A caller broke an operation's precondition."""

    exit_code = 3


class DimensionError(ContractError):
    pass


class InvalidMaskError(ContractError):
    pass


class DegenerateInputError(ContractError):
    pass


class GuardError(ContractError):
    pass


class InapplicableError(ContractError):
    """A requested combination of variant and ablation is not defined."""

    exit_code = 1


class NotFittedError(GrnOrderError, AttributeError):
    exit_code = 1


class DataWarning(UserWarning):
    pass
