class CauPsiError(Exception):

    """
    Base class of all errors raised by CauPsi. Every error class carries the
    exit code that the command line interface returns when the error ends a
    command.
    """

    exit_code = 1


class UsageError(CauPsiError):
    exit_code = 1


class ConfigError(CauPsiError, ValueError):
    exit_code = 2


class ShapeError(ConfigError):
    pass


class ContractError(ConfigError):
    pass


class DataError(CauPsiError):
    exit_code = 3


class MissingFileError(DataError):
    pass


class ShapeMismatchError(DataError):
    pass


class LabelRangeError(DataError):
    pass


class CheckpointError(DataError):
    pass


class NumericError(CauPsiError, ArithmeticError):
    exit_code = 4


class NumericalInputError(NumericError):
    pass


class TrainingError(NumericError):
    pass


class StorageError(CauPsiError):
    exit_code = 5
