from __future__ import annotations
from typing     import TYPE_CHECKING

if TYPE_CHECKING: from swsearch.base import AbstractTreePath


class SW_Error(Exception):
    """Base exception for all errors in swsearch."""


class SW_ValidationError(SW_Error):
    """Base exception for all record validation errors."""
class SW_PathValidationError(SW_ValidationError):
    """Validation error with location tracking inside nested records.
    
    Message is built as "At <path>: <condition>: <msg>", the path and condition parts
    only appear when given.
    """
    def __init__(self, path: AbstractTreePath, msg: str, condition: str|None = None) -> None:
        self.path      = path
        self.msg       = msg
        self.condition = condition
        
        full_message = ""
        if len(path) > 0:
            full_message += f"At {path.repr_as_python_code()}: "
        if condition is not None:
            full_message += f"{condition}: "
        full_message += msg
        super().__init__(full_message)
    
class SW_TypeValidationError(SW_PathValidationError, TypeError): pass
class SW_InvalidValueError(SW_PathValidationError, ValueError): pass
class SW_RangeValidationError(SW_PathValidationError, ValueError): pass


class SW_MalformedInputError(SW_Error, ValueError):
    """Raised when a FASTA stream violates the format."""
    def __init__(self, msg: str, line_number: int | None = None) -> None:
        self.line_number = line_number
        if line_number is not None:
            msg = f"line {line_number}: {msg}"
        super().__init__(msg)

class SW_MatrixFormatError(SW_Error, ValueError):
    """Raised when a substitution matrix text is incomplete, non-square or asymmetric."""
    def __init__(self, msg: str, row: str | None = None, column: str | None = None) -> None:
        self.row    = row
        self.column = column
        location = []
        if row is not None:
            location.append(f"row {row!r}")
        if column is not None:
            location.append(f"column {column!r}")
        if location:
            msg = f"{', '.join(location)}: {msg}"
        super().__init__(msg)

class SW_EncodingError(SW_Error, ValueError): pass
class SW_MeasurementError(SW_Error, ValueError): pass

class SW_DeterminismViolationError(SW_Error):
    """Raised when repeated searches of the same query disagree."""
    def __init__(self, query_id: str, msg: str) -> None:
        self.query_id = query_id
        super().__init__(f"query {query_id!r}: {msg}")

class SW_UsageError(SW_Error): pass


class SW_FailedFileWriteError(SW_Error, OSError): pass
class SW_FailedFileReadError(SW_Error, OSError): pass
class SW_FileNotFoundError(SW_Error, FileNotFoundError): pass


__all__ = [
    "SW_Error", "SW_ValidationError", "SW_PathValidationError",
    "SW_TypeValidationError", "SW_InvalidValueError", "SW_RangeValidationError",
    "SW_MalformedInputError", "SW_MatrixFormatError", "SW_EncodingError",
    "SW_MeasurementError", "SW_DeterminismViolationError", "SW_UsageError",
    "SW_FailedFileWriteError", "SW_FailedFileReadError", "SW_FileNotFoundError",
]
