class SpikesimError(Exception):
    """Base class for all errors raised by spikesim. The exit code is used
    by the command-line interface when the error reaches the top level."""

    exit_code = 1


class ConfigError(SpikesimError, ValueError):
    exit_code = 2


class DataError(SpikesimError, ValueError):
    exit_code = 3


class NumericError(SpikesimError, ArithmeticError):
    exit_code = 4


# Dataset files


class WrongMagicError(DataError):
    pass


class TruncatedError(DataError):
    pass


class DimensionMismatchError(DataError):
    pass


class LabelOutOfRangeError(DataError):
    pass


class CountTooLargeError(ConfigError):
    pass


# Networks


class ShapeMismatchError(DataError):
    pass


class SchemaError(DataError):
    pass


class MissingStatsError(DataError):
    pass


class NonFiniteLossError(NumericError):
    pass


# Neuron models


class OutOfRangeError(NumericError):
    pass


class NotMonotoneError(DataError):
    pass


class TooFewPointsError(DataError):
    pass


class DegenerateBaseError(NumericError):
    pass
