"""
Exception hierarchy for psmatch.

Library code raises these; only the command line layer turns them into exit
statuses, using each class's ``exit_code``.
"""
import typing
from enum import IntEnum


class ExitStatus(IntEnum):
    OK = 0
    ERROR = 1
    USAGE = 2
    PARSE = 3
    DOMAIN = 4
    DEGENERATE_ARM = 5
    BOUND = 6
    RANK_DEFICIENT = 7
    SEPARATION = 8
    SHAPE = 9
    MISSING_FILE = 10
    DUAL_FORM = 11
    WRITE_FAILED = 12


class PsmatchError(Exception):
    exit_code = ExitStatus.ERROR


class UsageError(PsmatchError):
    exit_code = ExitStatus.USAGE


class _RowError(PsmatchError):

    def __init__(self, message: str, row: typing.Optional[int] = None, column: typing.Optional[str] = None):
        self.row = row
        self.column = column
        if row is not None:
            message = f"row {row}" + (f", column '{column}'" if column else "") + f": {message}"
        super().__init__(message)


class ParseError(_RowError):
    """
    A cell in an input file could not be read as a number, or was missing.
    """
    exit_code = ExitStatus.PARSE


class DomainError(_RowError):
    """
    A value is well-formed but outside the domain the model allows, such as a
    treatment indicator of 2 or a propensity score of exactly 1.
    """
    exit_code = ExitStatus.DOMAIN


class DegenerateArmError(PsmatchError):
    exit_code = ExitStatus.DEGENERATE_ARM


class BoundError(PsmatchError):
    """
    A match count or window size exceeds what the relevant treatment arm holds.
    """
    exit_code = ExitStatus.BOUND


class RankDeficiencyError(PsmatchError):
    exit_code = ExitStatus.RANK_DEFICIENT


class SeparationError(PsmatchError):
    exit_code = ExitStatus.SEPARATION


class ShapeError(PsmatchError):
    exit_code = ExitStatus.SHAPE


class MissingFileError(PsmatchError):
    """
    An input or config file does not exist or cannot be read.
    """
    exit_code = ExitStatus.MISSING_FILE


class DualFormError(PsmatchError):
    """
    The two algebraic forms of the matching estimator disagree; only raised
    in strict mode.
    """
    exit_code = ExitStatus.DUAL_FORM
