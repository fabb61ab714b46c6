from __future__  import annotations
import io
import logging
from functools   import cache, cached_property
from pathlib     import Path
from typing      import Iterable

import numpy as np

from swsearch.base       import grepr_dataclass, AbstractTreePath, HasGreprValidate
from swsearch.decorators import enforce_argument_types
from swsearch.errors     import SW_MatrixFormatError, SW_EncodingError
from swsearch.file       import read_file_text
from swsearch.seqio      import PROTEIN_ALPHABET, Alphabet, EncodedSequence
from swsearch.validation import ValidateAttribute as VA


logger = logging.getLogger(__name__)

DEFAULT_MATRIX_NAME = "BLOSUM62"
DEFAULT_GAP_OPEN = 10
DEFAULT_GAP_EXTEND = 2
PADDING_MATCH = 1
PADDING_MISMATCH = -1

_BLOSUM62_TEXT = """\
#  Matrix made by matblas from blosum62.iij
#  * column uses minimum score
#  BLOSUM Clustered Scoring Matrix in 1/2 Bit Units
#  Blocks Database = /data/blocks_5.0/blocks.dat
#  Cluster Percentage: >= 62
#  Entropy =   0.6979, Expected =  -0.5209
   A  R  N  D  C  Q  E  G  H  I  L  K  M  F  P  S  T  W  Y  V  B  Z  X  *
A  4 -1 -2 -2  0 -1 -1  0 -2 -1 -1 -1 -1 -2 -1  1  0 -3 -2  0 -2 -1  0 -4
R -1  5  0 -2 -3  1  0 -2  0 -3 -2  2 -1 -3 -2 -1 -1 -3 -2 -3 -1  0 -1 -4
N -2  0  6  1 -3  0  0  0  1 -3 -3  0 -2 -3 -2  1  0 -4 -2 -3  3  0 -1 -4
D -2 -2  1  6 -3  0  2 -1 -1 -3 -4 -1 -3 -3 -1  0 -1 -4 -3 -3  4  1 -1 -4
C  0 -3 -3 -3  9 -3 -4 -3 -3 -1 -1 -3 -1 -2 -3 -1 -1 -2 -2 -1 -3 -3 -2 -4
Q -1  1  0  0 -3  5  2 -2  0 -3 -2  1  0 -3 -1  0 -1 -2 -1 -2  0  3 -1 -4
E -1  0  0  2 -4  2  5 -2  0 -3 -3  1 -2 -3 -1  0 -1 -3 -2 -2  1  4 -1 -4
G  0 -2  0 -1 -3 -2 -2  6 -2 -4 -4 -2 -3 -3 -2  0 -2 -2 -3 -3 -1 -2 -1 -4
H -2  0  1 -1 -3  0  0 -2  8 -3 -3 -1 -2 -1 -2 -1 -2 -2  2 -3  0  0 -1 -4
I -1 -3 -3 -3 -1 -3 -3 -4 -3  4  2 -3  1  0 -3 -2 -1 -3 -1  3 -3 -3 -1 -4
L -1 -2 -3 -4 -1 -2 -3 -4 -3  2  4 -2  2  0 -3 -2 -1 -2 -1  1 -4 -3 -1 -4
K -1  2  0 -1 -3  1  1 -2 -1 -3 -2  5 -1 -3 -1  0 -1 -3 -2 -2  0  1 -1 -4
M -1 -1 -2 -3 -1  0 -2 -3 -2  1  2 -1  5  0 -2 -1 -1 -1 -1  1 -3 -1 -1 -4
F -2 -3 -3 -3 -2 -3 -3 -3 -1  0  0 -3  0  6 -4 -2 -2  1  3 -1 -3 -3 -1 -4
P -1 -2 -2 -1 -3 -1 -1 -2 -2 -3 -3 -1 -2 -4  7 -1 -1 -4 -3 -2 -2 -1 -2 -4
S  1 -1  1  0 -1  0  0  0 -1 -2 -2  0 -1 -2 -1  4  1 -3 -2 -2  0  0  0 -4
T  0 -1  0 -1 -1 -1 -1 -2 -2 -1 -1 -1 -1 -2 -1  1  5 -2 -2  0 -1 -1  0 -4
W -3 -3 -4 -4 -2 -2 -3 -2 -2 -3 -2 -3 -1  1 -4 -3 -2 11  2 -3 -4 -3 -2 -4
Y -2 -2 -2 -3 -2 -1 -2 -3  2 -1 -1 -2 -1  3 -3 -2 -2  2  7 -1 -3 -2 -1 -4
V  0 -3 -3 -3 -1 -2 -2 -3 -3  3  1 -2  1 -1 -2 -2  0 -3 -1  4 -3 -2 -1 -4
B -2 -1  3  4 -3  0  1 -1  0 -3 -4  0 -3 -3 -2  0 -1 -4 -3 -3  4  1 -1 -4
Z -1  0  0  1 -3  3  4 -2  0 -3 -3  1 -1 -3 -1  0 -1 -3 -2 -2  1  4 -1 -4
X  0 -1 -1 -1 -2 -1 -1 -1 -1 -1 -1 -1 -1 -1 -2  0  0 -2 -1 -1 -1 -1 -1 -4
* -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4 -4  1
"""


@grepr_dataclass(frozen=True, order=False)
class ScoringMatrix(HasGreprValidate):
    """
    Symmetric substitution table over an alphabet. Scores are nested tuples so matrices
    compare by value; kernels use the cached int32 `table`.
    """
    name: str
    alphabet: Alphabet
    scores: tuple[tuple[int, ...], ...]

    def post_validate(self, path: AbstractTreePath) -> None:
        VA.VA_EXACT_LEN(self, path, "scores", self.size)
        for a, row in enumerate(self.scores):
            if len(row) != self.size:
                raise SW_MatrixFormatError(f"row has {len(row)} cells, expected {self.size}", row=self.alphabet.symbols[a])
            for b in range(a):
                if row[b] != self.scores[b][a]:
                    raise SW_MatrixFormatError(
                        f"asymmetric cell: {row[b]} != {self.scores[b][a]}",
                        row=self.alphabet.symbols[a], column=self.alphabet.symbols[b],
                    )

    @property
    def size(self) -> int:
        return self.alphabet.size

    @cached_property
    def table(self) -> np.ndarray:
        table = np.array(self.scores, dtype=np.int32).reshape(self.size, self.size)
        table.flags.writeable = False
        return table

    def score(self, a: str, b: str) -> int:
        """Substitution score between two residue characters."""
        return self.scores[self.alphabet.index(a)][self.alphabet.index(b)]

@grepr_dataclass(frozen=True)
class GapModel(HasGreprValidate):
    """
    Affine gap penalties as positive magnitudes: a gap of length L costs
    open_penalty + (L - 1) * extend_penalty ("10(2)" is GapModel(10, 2)).
    """
    open_penalty: int = DEFAULT_GAP_OPEN
    extend_penalty: int = DEFAULT_GAP_EXTEND

    def post_validate(self, path: AbstractTreePath) -> None:
        VA.VA_MIN(self, path, "extend_penalty", 0)
        VA.VA_MIN(self, path, "open_penalty", self.extend_penalty, condition="affine gaps")

    def gap_cost(self, length: int) -> int:
        if length <= 0:
            return 0
        return self.open_penalty + (length - 1) * self.extend_penalty

    def __str__(self) -> str:
        return f"{self.open_penalty}({self.extend_penalty})"

@grepr_dataclass(frozen=True, eq=False, order=False)
class QueryProfile(HasGreprValidate):
    """
    Per-query substitution scores indexed by subject residue:
    rows[s][j] == matrix.table[s][query.codes[j]].
    """
    query: EncodedSequence
    matrix: ScoringMatrix
    rows: np.ndarray

    def post_validate(self, path: AbstractTreePath) -> None:
        if self.rows.shape != (self.matrix.size, self.query.length):
            raise SW_EncodingError(f"profile shape {self.rows.shape} does not match ({self.matrix.size}, {self.query.length})")


@enforce_argument_types
def parse_matrix(text: str | Iterable[str], name: str = "custom", alphabet: Alphabet = PROTEIN_ALPHABET) -> ScoringMatrix:
    """
    Parse an NCBI-style substitution matrix: '#' comment lines, one header row of column
    symbols, then one labelled row per symbol.

    Symbols of `alphabet` that the file does not cover are padded with +1 on the diagonal
    and -1 elsewhere, so small toy matrices stay usable.

    Raises:
        SW_MatrixFormatError: for unknown or duplicated symbols, missing rows, rows of the wrong
            width, non-integer cells or asymmetric cells (row/column identified)
    """
    lines = io.StringIO(text) if isinstance(text, str) else text
    columns: list[str] | None = None
    rows: dict[str, list[int]] = {}

    for raw_line in lines:
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if columns is None:
            columns = [symbol.upper() for symbol in tokens]
            for symbol in columns:
                if symbol not in alphabet.symbols:
                    raise SW_MatrixFormatError("symbol not in alphabet", column=symbol)
            if len(set(columns)) != len(columns):
                raise SW_MatrixFormatError("duplicated column symbol")
            continue

        label, cells = tokens[0].upper(), tokens[1:]
        if label not in columns:
            raise SW_MatrixFormatError("row symbol missing from the column header", row=label)
        if label in rows:
            raise SW_MatrixFormatError("duplicated row", row=label)
        if len(cells) != len(columns):
            raise SW_MatrixFormatError(f"non-square table: {len(cells)} cells for {len(columns)} columns", row=label)
        try:
            rows[label] = [int(cell) for cell in cells]
        except ValueError as error:
            raise SW_MatrixFormatError(f"non-integer cell: {error}", row=label) from error

    if columns is None:
        raise SW_MatrixFormatError("no column header row found")
    for symbol in columns:
        if symbol not in rows:
            raise SW_MatrixFormatError("row missing for column symbol", row=symbol)

    position = {symbol: i for i, symbol in enumerate(columns)}
    scores = []
    for a in alphabet.symbols:
        row = []
        for b in alphabet.symbols:
            if a in position and b in position:
                row.append(rows[a][position[b]])
            else:
                row.append(PADDING_MATCH if a == b else PADDING_MISMATCH)
        scores.append(tuple(row))
    if len(columns) < alphabet.size:
        logger.debug("matrix %r covers %d of %d symbols, padded", name, len(columns), alphabet.size)

    matrix = ScoringMatrix(name=name, alphabet=alphabet, scores=tuple(scores))
    matrix.validate()
    return matrix

@enforce_argument_types
def format_matrix(matrix: ScoringMatrix) -> str:
    """Serialise a matrix in the NCBI text layout accepted by parse_matrix."""
    symbols = matrix.alphabet.symbols
    width = max(2, *(len(str(score)) for row in matrix.scores for score in row))
    lines = [f"# {matrix.name}", "  " + " ".join(f"{symbol:>{width}}" for symbol in symbols)]
    for symbol, row in zip(symbols, matrix.scores):
        lines.append(symbol + " " + " ".join(f"{score:>{width}}" for score in row))
    return "\n".join(lines) + "\n"

@cache
def builtin_blosum62() -> ScoringMatrix:
    """The published NCBI BLOSUM62 table over the 24-symbol protein alphabet."""
    return parse_matrix(_BLOSUM62_TEXT, name=DEFAULT_MATRIX_NAME)

BUILTIN_MATRICES = {DEFAULT_MATRIX_NAME: builtin_blosum62}

@enforce_argument_types
def load_matrix(selector: str | Path) -> ScoringMatrix:
    """Resolve a built-in matrix name (case-insensitive) or read an NCBI matrix file."""
    if isinstance(selector, str) and selector.upper() in BUILTIN_MATRICES:
        return BUILTIN_MATRICES[selector.upper()]()
    path = Path(selector)
    return parse_matrix(read_file_text(path), name=path.name)

@enforce_argument_types
def make_profile(matrix: ScoringMatrix, query: EncodedSequence) -> QueryProfile:
    """
    Precompute the query profile.

    Raises:
        SW_EncodingError: if a query code is outside the matrix alphabet
    """
    codes = query.array
    if codes.size and int(codes.max()) >= matrix.size:
        raise SW_EncodingError(f"query {query.source_header!r} has code {int(codes.max())} outside a {matrix.size}-symbol matrix")
    rows = matrix.table[:, codes]
    rows.flags.writeable = False
    return QueryProfile(query=query, matrix=matrix, rows=rows)


__all__ = [
    "DEFAULT_MATRIX_NAME", "DEFAULT_GAP_OPEN", "DEFAULT_GAP_EXTEND",
    "ScoringMatrix", "GapModel", "QueryProfile",
    "parse_matrix", "format_matrix", "builtin_blosum62", "load_matrix", "make_profile",
]
