from __future__  import annotations
import io
import logging
from functools   import cached_property
from pathlib     import Path
from typing      import Iterable, TextIO

import numpy as np

from swsearch.base       import grepr_dataclass, field, AbstractTreePath, HasGreprValidate
from swsearch.decorators import enforce_argument_types
from swsearch.errors     import SW_MalformedInputError, SW_FailedFileReadError
from swsearch.file       import read_file_text
from swsearch.validation import ValidateAttribute as VA


logger = logging.getLogger(__name__)

PROTEIN_SYMBOLS = tuple("ARNDCQEGHILKMFPSTWYVBZX*")
UNKNOWN_SYMBOL = "X"
FASTA_LINE_WIDTH = 60


@grepr_dataclass(frozen=True, order=False)
class Alphabet(HasGreprValidate):
    """
    Ordered residue alphabet. Lookup is case-insensitive; every character outside the
    alphabet (gaps '-' and '.' included) maps to the unknown symbol.
    """
    symbols: tuple[str, ...]
    unknown_symbol: str = UNKNOWN_SYMBOL

    def post_validate(self, path: AbstractTreePath) -> None:
        VA.VA_MIN_LEN(self, path, "symbols", 1)
        VA.VA_ONE_OF(self, path, "unknown_symbol", self.symbols)

    @property
    def size(self) -> int:
        return len(self.symbols)

    @cached_property
    def unknown_index(self) -> int:
        return self.symbols.index(self.unknown_symbol)

    @cached_property
    def _byte_tables(self) -> tuple[np.ndarray, np.ndarray]:
        codes = np.full(256, self.unknown_index, dtype=np.uint8)
        known = np.zeros(256, dtype=bool)
        for index, symbol in enumerate(self.symbols):
            for variant in {symbol.upper(), symbol.lower()}:
                codes[ord(variant)] = index
                known[ord(variant)] = True
        return codes, known

    def index(self, symbol: str) -> int:
        """Index of one residue character, the unknown index for anything outside the alphabet."""
        codes, _ = self._byte_tables
        if len(symbol) != 1 or ord(symbol) > 255:
            return self.unknown_index
        return int(codes[ord(symbol)])

    def encode(self, residues: str) -> tuple[bytes, int]:
        """Map a residue string to alphabet indices. Returns (codes, number of coerced characters)."""
        codes, known = self._byte_tables
        raw = np.frombuffer(residues.encode("ascii", errors="replace"), dtype=np.uint8)
        return codes[raw].tobytes(), int(raw.size - np.count_nonzero(known[raw]))

    def decode(self, codes: bytes) -> str:
        return "".join(self.symbols[code] for code in codes)

PROTEIN_ALPHABET = Alphabet(PROTEIN_SYMBOLS)


@grepr_dataclass(frozen=True, order=False)
class SequenceRecord(HasGreprValidate):
    """One FASTA entry: the description line without '>' and the concatenated residues."""
    header: str
    residues: str

    def post_validate(self, path: AbstractTreePath) -> None:
        VA.VA_NON_BLANK(self, path, "header")

    @property
    def is_empty(self) -> bool:
        return not self.residues

@grepr_dataclass(frozen=True, order=False)
class EncodedSequence(HasGreprValidate):
    """
    Residues as alphabet indices. Codes are kept as immutable bytes so records stay
    comparable and hashable; kernels read them through `array`.
    """
    codes: bytes
    length: int
    source_header: str = ""
    unknown_count: int = field(default=0, grepr=False)

    def post_validate(self, path: AbstractTreePath, alphabet_size: int = PROTEIN_ALPHABET.size) -> None:
        VA.VA_EQUAL(self, path, "length", len(self.codes))
        VA.VA_MIN(self, path, "unknown_count", 0)
        VA.VA_CODES_BELOW(self, path, "codes", alphabet_size)

    @property
    def array(self) -> np.ndarray:
        """Read-only uint8 view of the codes."""
        return np.frombuffer(self.codes, dtype=np.uint8)

    def __len__(self) -> int:
        return self.length

@grepr_dataclass(frozen=True, order=False)
class SequenceDatabase(HasGreprValidate):
    """
    Immutable, indexed collection of encoded sequences with aggregate statistics.
    Safe for concurrent reads; the search hot path only touches `code_arrays` and `lengths`.
    """
    sequences: tuple[EncodedSequence, ...]
    total_residues: int
    max_length: int
    num_sequences: int

    @classmethod
    def from_sequences(cls, sequences: Iterable[EncodedSequence]) -> SequenceDatabase:
        sequences = tuple(sequences)
        database = cls(
            sequences=sequences,
            total_residues=sum(sequence.length for sequence in sequences),
            max_length=max((sequence.length for sequence in sequences), default=0),
            num_sequences=len(sequences),
        )
        database.validate()
        return database

    def post_validate(self, path: AbstractTreePath) -> None:
        VA.VA_EQUAL(self, path, "num_sequences", len(self.sequences))
        VA.VA_EQUAL(self, path, "total_residues", sum(sequence.length for sequence in self.sequences))
        VA.VA_EQUAL(self, path, "max_length", max((sequence.length for sequence in self.sequences), default=0))
        for i, sequence in enumerate(self.sequences):
            sequence.post_validate(path.add_attribute("sequences").add_index_or_key(i))

    @cached_property
    def lengths(self) -> np.ndarray:
        return np.fromiter((sequence.length for sequence in self.sequences), dtype=np.int64, count=self.num_sequences)

    @cached_property
    def code_arrays(self) -> tuple[np.ndarray, ...]:
        return tuple(sequence.array for sequence in self.sequences)

    @cached_property
    def headers(self) -> tuple[str, ...]:
        return tuple(sequence.source_header for sequence in self.sequences)

    def describe(self) -> str:
        return f"{self.num_sequences} sequences, {self.total_residues} residues, max {self.max_length}"

    def __len__(self) -> int:
        return self.num_sequences

    def __getitem__(self, index: int) -> EncodedSequence:
        return self.sequences[index]


@enforce_argument_types
def parse_fasta(stream: Iterable[str]) -> list[SequenceRecord]:
    """
    Parse FASTA text into records, in stream order. `stream` yields lines (an open
    file, a list of lines); a plain string is read as the whole FASTA text.

    Residue lines are concatenated with all whitespace removed; LF and CRLF line ends
    are accepted and blank lines are ignored.

    Raises:
        SW_MalformedInputError: if the first non-blank line is not a '>' header or a header is empty
        SW_FailedFileReadError: if reading the stream fails
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    records: list[SequenceRecord] = []
    header: str | None = None
    chunks: list[str] = []

    def finish() -> None:
        if header is not None:
            records.append(SequenceRecord(header=header, residues="".join(chunks)))

    try:
        for line_number, raw_line in enumerate(stream, start=1):
            line = raw_line.strip()
            if not line:
                continue
            if line.startswith(">"):
                finish()
                header = line[1:].strip()
                chunks = []
                if not header:
                    raise SW_MalformedInputError("header line without description", line_number)
            elif header is None:
                raise SW_MalformedInputError("first non-blank line must start with '>'", line_number)
            else:
                chunks.append("".join(line.split()))
    except (OSError, UnicodeDecodeError) as error:
        raise SW_FailedFileReadError(f"Failed to read FASTA stream: {error}") from error
    finish()
    return records

@enforce_argument_types
def encode_sequence(record: SequenceRecord, alphabet: Alphabet = PROTEIN_ALPHABET) -> EncodedSequence:
    """
    Encode a record's residues case-insensitively. Characters outside the alphabet are
    coerced to the unknown symbol and counted in `unknown_count`.
    """
    codes, unknown_count = alphabet.encode(record.residues)
    if unknown_count:
        logger.debug("coerced %d unknown residue(s) to %r in %r", unknown_count, alphabet.unknown_symbol, record.header)
    return EncodedSequence(codes=codes, length=len(codes), source_header=record.header, unknown_count=unknown_count)

@enforce_argument_types
def decode_sequence(sequence: EncodedSequence, alphabet: Alphabet = PROTEIN_ALPHABET) -> str:
    return alphabet.decode(sequence.codes)

def _load_encoded(path: str | Path, alphabet: Alphabet) -> list[EncodedSequence]:
    records = parse_fasta(io.StringIO(read_file_text(path)))
    sequences = [encode_sequence(record, alphabet) for record in records]

    empty_count = sum(1 for record in records if record.is_empty)
    if empty_count:
        logger.warning("%s: %d zero-length record(s) kept", path, empty_count)
    unknown_total = sum(sequence.unknown_count for sequence in sequences)
    if unknown_total:
        logger.warning("%s: %d residue(s) outside the alphabet coerced to %r", path, unknown_total, alphabet.unknown_symbol)
    return sequences

@enforce_argument_types
def load_database(path: str | Path, alphabet: Alphabet = PROTEIN_ALPHABET) -> SequenceDatabase:
    """
    Parse, encode and index a FASTA database. Sequence order equals file order.

    Raises:
        SW_FileNotFoundError, SW_FailedFileReadError: if the file cannot be read
        SW_MalformedInputError: if the file is not FASTA
    """
    database = SequenceDatabase.from_sequences(_load_encoded(path, alphabet))
    if database.num_sequences == 0:
        logger.warning("%s: database is empty", path)
    logger.info("loaded %s: %s", path, database.describe())
    return database

@enforce_argument_types
def load_queries(path: str | Path, alphabet: Alphabet = PROTEIN_ALPHABET) -> list[EncodedSequence]:
    """Load every record of a query FASTA, in file order."""
    queries = _load_encoded(path, alphabet)
    logger.info("loaded %d quer%s from %s", len(queries), "y" if len(queries) == 1 else "ies", path)
    return queries

@enforce_argument_types
def write_fasta(sequences: Iterable[EncodedSequence], sink: TextIO | io.TextIOBase,
        alphabet: Alphabet = PROTEIN_ALPHABET, width: int = FASTA_LINE_WIDTH) -> None:
    """Write encoded sequences as FASTA, residue lines wrapped at `width` characters."""
    for sequence in sequences:
        sink.write(f">{sequence.source_header}\n")
        residues = alphabet.decode(sequence.codes)
        for start in range(0, len(residues), width):
            sink.write(residues[start:start + width] + "\n")


__all__ = [
    "PROTEIN_SYMBOLS", "PROTEIN_ALPHABET", "Alphabet",
    "SequenceRecord", "EncodedSequence", "SequenceDatabase",
    "parse_fasta", "encode_sequence", "decode_sequence",
    "load_database", "load_queries", "write_fasta",
]
