# v1.0.0 - Work Package 0: Error Hierarchy
"""
Every failure the library can report. Each class carries the exit code the CLI
returns for it; libraries only raise, app.main() does the mapping.
"""


class MixSincError(ValueError):
    """Base class. Subclassing ValueError keeps plain `except ValueError` callers working."""
    exit_code = 10


class InvalidArgumentError(MixSincError):
    exit_code = 11


class DimensionMismatchError(MixSincError):
    exit_code = 12


class InvalidModeError(MixSincError):
    exit_code = 13


class UnusableVariableError(MixSincError):
    exit_code = 14


class DegenerateSupportError(MixSincError):
    exit_code = 15


class InvalidValueError(MixSincError):
    exit_code = 16


class EmptyStatisticsError(MixSincError):
    exit_code = 17


class InsufficientVariablesError(MixSincError):
    exit_code = 18


class InvalidFactorError(MixSincError):
    exit_code = 19


class UnknownFamilyError(MixSincError):
    exit_code = 20


class AllMissingError(MixSincError):
    exit_code = 21


class LengthMismatchError(MixSincError):
    exit_code = 22


class InsufficientDataError(MixSincError):
    exit_code = 23


class ModelKindError(MixSincError):
    exit_code = 24


class IndexOutOfRangeError(MixSincError):
    exit_code = 25


class InputFileError(MixSincError):
    """Missing or unreadable input file."""
    exit_code = 4


class OutputPathError(MixSincError):
    """Output location cannot be created or written."""
    exit_code = 3
