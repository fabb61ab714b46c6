from __future__  import annotations
import logging

import numpy as np

from swsearch.base       import grepr_dataclass, AbstractTreePath, HasGreprValidate
from swsearch.decorators import enforce_argument_types
from swsearch.errors     import SW_InvalidValueError
from swsearch.kernels    import NEG_INF, DpState, _gap_offsets, _profile_rows64, _scalar_best
from swsearch.scoring    import GapModel, ScoringMatrix, make_profile
from swsearch.seqio      import EncodedSequence
from swsearch.validation import ValidateAttribute as VA


logger = logging.getLogger(__name__)

DEFAULT_MEMORY_CAP = 256 * 1024 * 1024
BYTES_PER_CELL = 3 * np.dtype(np.int64).itemsize
ALIGNMENT_LINE_WIDTH = 60

OP_MATCH = "M"
OP_SUBSTITUTE = "X"
OP_INSERT = "I" # subject residue against a gap in the query
OP_DELETE = "D" # query residue against a gap in the subject
OPERATIONS = (OP_MATCH, OP_SUBSTITUTE, OP_INSERT, OP_DELETE)


@grepr_dataclass(frozen=True, order=False)
class Alignment(HasGreprValidate):
    """
    One optimal local alignment. Ranges are half-open [start, end) into query and subject;
    `operations` is the edit script, one character per column (see OPERATIONS).
    A capped alignment carries only the score: the full matrix did not fit the memory cap.
    """
    query_range: tuple[int, int]
    subject_range: tuple[int, int]
    operations: str
    score: int
    positives: int = 0
    capped: bool = False

    def post_validate(self, path: AbstractTreePath, query_length: int | None = None, subject_length: int | None = None) -> None:
        VA.VA_MIN(self, path, "score", 0)
        VA.VA_MIN(self, path, "positives", 0)
        for attr, bound in (("query_range", query_length), ("subject_range", subject_length)):
            start, end = getattr(self, attr)
            if not 0 <= start <= end or (bound is not None and end > bound):
                raise SW_InvalidValueError(path.add_attribute(attr), f"range ({start}, {end}) outside [0, {bound}]")
        if self.capped:
            VA.VA_EQUAL(self, path, "operations", "", condition="capped alignment")
            return
        if set(self.operations) - set(OPERATIONS):
            raise SW_InvalidValueError(path.add_attribute("operations"), f"unknown operation(s) in {self.operations!r}")
        VA.VA_MAX(self, path, "positives", self.length, condition="one per aligned column")
        consumed_query = sum(1 for op in self.operations if op != OP_INSERT)
        consumed_subject = sum(1 for op in self.operations if op != OP_DELETE)
        if (consumed_query, consumed_subject) != (self.query_range[1] - self.query_range[0],
                                                  self.subject_range[1] - self.subject_range[0]):
            raise SW_InvalidValueError(path.add_attribute("operations"), "edit script does not span the aligned ranges")

    @property
    def length(self) -> int:
        return len(self.operations)

    @property
    def identities(self) -> int:
        return self.operations.count(OP_MATCH)

    @property
    def gaps(self) -> int:
        return self.operations.count(OP_INSERT) + self.operations.count(OP_DELETE)

    @classmethod
    def empty(cls) -> Alignment:
        return cls(query_range=(0, 0), subject_range=(0, 0), operations="", score=0)


def _full_matrices(rows64: np.ndarray, subject: np.ndarray, gaps: GapModel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    query_length = rows64.shape[1]
    shape = (query_length + 1, subject.size + 1)
    H = np.zeros(shape, dtype=np.int64)
    E = np.full(shape, NEG_INF, dtype=np.int64)
    F = E.copy()
    state = DpState.initial(query_length)
    offsets = _gap_offsets(query_length, gaps.extend_penalty)
    for j, code in enumerate(subject, start=1):
        state.advance(rows64[code], gaps, offsets)
        H[:, j], E[:, j], F[:, j] = state.H_row, state.E_row, state.F_cell
    return H, E, F

def _trace(H: np.ndarray, E: np.ndarray, F: np.ndarray, query: np.ndarray, subject: np.ndarray,
        matrix: ScoringMatrix, gaps: GapModel) -> Alignment:
    end_i, end_j = (int(index) for index in np.unravel_index(int(np.argmax(H)), H.shape))
    score = int(H[end_i, end_j])
    if score == 0:
        return Alignment.empty()

    table = matrix.table
    gap_open = gaps.open_penalty
    operations: list[str] = []
    positives = 0
    i, j, layer = end_i, end_j, "H"
    while True:
        if layer == "H":
            value = H[i, j]
            if value == 0:
                break
            substitution = int(table[query[i - 1], subject[j - 1]])
            if value == H[i - 1, j - 1] + substitution:
                operations.append(OP_MATCH if query[i - 1] == subject[j - 1] else OP_SUBSTITUTE)
                positives += substitution > 0
                i, j = i - 1, j - 1
            elif value == E[i, j]:
                layer = "E"
            else:
                layer = "F"
        elif layer == "E":
            operations.append(OP_INSERT)
            if E[i, j] == H[i, j - 1] - gap_open:
                layer = "H"
            j -= 1
        else:
            operations.append(OP_DELETE)
            if F[i, j] == H[i - 1, j] - gap_open:
                layer = "H"
            i -= 1

    return Alignment(
        query_range=(i, end_i),
        subject_range=(j, end_j),
        operations="".join(reversed(operations)),
        score=score,
        positives=positives,
    )

@enforce_argument_types
def sw_align_traceback(query: EncodedSequence, subject: EncodedSequence, matrix: ScoringMatrix, gaps: GapModel,
        memory_cap: int = DEFAULT_MEMORY_CAP) -> Alignment:
    """
    Recover an optimal local alignment with its edit script.

    The full H/E/F matrices are kept only when (|query|+1)*(|subject|+1) cells fit
    `memory_cap` bytes; otherwise a capped, score-only Alignment is returned.
    The score always equals sw_score_scalar. The alignment ends at the first maximal
    cell in query-major order; ties on the path prefer diagonal, then E, then F,
    and gap opening over gap extension.
    """
    rows64 = _profile_rows64(make_profile(matrix, query).rows)
    if query.length == 0 or subject.length == 0:
        return Alignment.empty()

    needed = (query.length + 1) * (subject.length + 1) * BYTES_PER_CELL
    if needed > memory_cap:
        logger.warning("traceback of %r vs %r needs %d bytes, over the cap of %d: score only",
            query.source_header, subject.source_header, needed, memory_cap)
        score = _scalar_best(rows64, subject.array, gaps)
        return Alignment(query_range=(0, 0), subject_range=(0, 0), operations="", score=score, capped=True)

    H, E, F = _full_matrices(rows64, subject.array, gaps)
    alignment = _trace(H, E, F, query.array, subject.array, matrix, gaps)
    alignment.validate(None, query.length, subject.length)
    return alignment

@enforce_argument_types
def rescore_alignment(alignment: Alignment, query: EncodedSequence, subject: EncodedSequence,
        matrix: ScoringMatrix, gaps: GapModel) -> int:
    """
    Score an edit script from scratch: substitution scores for aligned columns, and
    open + (L - 1) * extend for every maximal run of one gap kind.

    Raises:
        SW_InvalidValueError: if the script does not fit the aligned ranges
    """
    alignment.validate(None, query.length, subject.length)
    i, j = alignment.query_range[0], alignment.subject_range[0]
    score, previous = 0, None
    for op in alignment.operations:
        if op in (OP_MATCH, OP_SUBSTITUTE):
            score += matrix.scores[query.codes[i]][subject.codes[j]]
            i, j = i + 1, j + 1
        else:
            score -= gaps.extend_penalty if op == previous else gaps.open_penalty
            if op == OP_INSERT:
                j += 1
            else:
                i += 1
        previous = op
    return score

@enforce_argument_types
def format_alignment(alignment: Alignment, query: EncodedSequence, subject: EncodedSequence,
        matrix: ScoringMatrix, width: int = ALIGNMENT_LINE_WIDTH) -> str:
    """
    Three-line display (query, match, subject) wrapped at `width` columns. The match
    line shows '|' for identities, '+' for other positive pairs and ' ' otherwise.
    Positions are 1-based and inclusive.
    """
    if alignment.capped:
        return "(alignment omitted: traceback matrix over the memory cap)\n"
    if not alignment.operations:
        return "(empty alignment)\n"

    symbols = matrix.alphabet.symbols
    query_line, match_line, subject_line = [], [], []
    i, j = alignment.query_range[0], alignment.subject_range[0]
    for op in alignment.operations:
        q = query.codes[i] if op != OP_INSERT else None
        s = subject.codes[j] if op != OP_DELETE else None
        query_line.append(symbols[q] if q is not None else "-")
        subject_line.append(symbols[s] if s is not None else "-")
        if q is None or s is None:
            match_line.append(" ")
        elif q == s:
            match_line.append("|")
        else:
            match_line.append("+" if matrix.scores[q][s] > 0 else " ")
        i += q is not None
        j += s is not None

    lines = []
    query_pos, subject_pos = alignment.query_range[0], alignment.subject_range[0]
    for start in range(0, alignment.length, width):
        query_chunk = "".join(query_line[start:start + width])
        subject_chunk = "".join(subject_line[start:start + width])
        query_used = len(query_chunk) - query_chunk.count("-")
        subject_used = len(subject_chunk) - subject_chunk.count("-")
        lines.append(f"Query  {query_pos + 1:>6}  {query_chunk}  {query_pos + query_used}")
        lines.append(f"{'':15}{''.join(match_line[start:start + width])}")
        lines.append(f"Sbjct  {subject_pos + 1:>6}  {subject_chunk}  {subject_pos + subject_used}")
        lines.append("")
        query_pos += query_used
        subject_pos += subject_used
    return "\n".join(lines)


__all__ = [
    "DEFAULT_MEMORY_CAP", "OP_MATCH", "OP_SUBSTITUTE", "OP_INSERT", "OP_DELETE",
    "Alignment", "sw_align_traceback", "rescore_alignment", "format_alignment",
]
