from __future__ import annotations
from pathlib import Path

from swsearch.decorators import enforce_argument_types
from swsearch.errors     import SW_FileNotFoundError, SW_FailedFileWriteError, SW_FailedFileReadError


@enforce_argument_types
def read_file_text(file_path: str | Path, encoding: str = "utf-8") -> str:
    """
    Read the text content of a file (FASTA databases, query files, matrix files)

    Args:
        file_path: path (str or pathlib.Path) to the file to read
        encoding: encoding to use when reading the file. default is 'utf-8'

    Raises:
        SW_FileNotFoundError: If the file was not found
        SW_FailedFileReadError: For OS-related errors like permission denied, a directory path or decoding failures
    """
    try:
        # newline="" keeps CR characters, the FASTA parser strips them per line
        with open(file_path, "r", encoding=encoding, newline="") as file:
            return file.read()

    except FileNotFoundError as error:
        raise SW_FileNotFoundError(f"Failed to read, file does not exist: {error}") from error
    except (ValueError, PermissionError, IsADirectoryError,
            NotADirectoryError, UnicodeDecodeError, OSError) as error:
        raise SW_FailedFileReadError(f"Failed to read from {str(file_path)!r}: {error}") from error

@enforce_argument_types
def write_file_text(file_path: str | Path, text: str, encoding: str = "utf-8") -> None:
    """
    Write text to a file (CSV reports, synthetic databases, search output).

    Args:
        file_path: file path (str or pathlib.Path) of the file to write to
        text: the text to write
        encoding: the text encoding to use

    Raises:
        SW_FailedFileWriteError: If an OS-level error occurs (e.g. missing directory, permission denied,
                                 is a directory) or `text` is not compatible with `encoding`
    """
    try:
        with open(file_path, mode="w", encoding=encoding, newline="") as file:
            file.write(text)

    except UnicodeEncodeError as error:
        raise SW_FailedFileWriteError(f"Failed to write to {str(file_path)!r} because of encoding failure: {error}") from error
    except (ValueError, FileNotFoundError, PermissionError, IsADirectoryError, OSError) as error:
        raise SW_FailedFileWriteError(f"Failed to write to {str(file_path)!r}: {error}") from error


__all__ = ["read_file_text", "write_file_text"]
