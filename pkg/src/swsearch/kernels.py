"""
Smith-Waterman score kernels with affine gaps (three-layer Gotoh recurrence).

Indices: i runs over the query, j over the subject.

    H[i][j] = max(0, H[i-1][j-1] + sub(q_i, s_j), E[i][j], F[i][j])
    E[i][j] = max(H[i][j-1] - open, E[i][j-1] - extend)     gap layer along the subject
    F[i][j] = max(H[i-1][j] - open, F[i-1][j] - extend)     gap layer along the query

Every kernel walks the subject one column at a time and keeps one column of H and E
(linear space). Inside a column, F is resolved with a running maximum over
`H_without_F[k] + k * extend`. This equals the sequential F recurrence because
open >= extend, so a vertical gap never profits from starting inside another one.
"""
from __future__  import annotations
import logging
from functools   import cached_property
from typing      import Sequence

import numpy as np

from swsearch.base       import grepr_dataclass, AbstractTreePath, HasGreprValidate
from swsearch.decorators import enforce_argument_types
from swsearch.errors     import SW_RangeValidationError
from swsearch.scoring    import GapModel, QueryProfile, ScoringMatrix, make_profile
from swsearch.seqio      import EncodedSequence
from swsearch.validation import ValidateAttribute as VA


logger = logging.getLogger(__name__)

NEG_INF = -(1 << 40)
INT16_MIN = int(np.iinfo(np.int16).min)
INT16_MAX = int(np.iinfo(np.int16).max)
DEFAULT_LANE_WIDTH = 16
DEFAULT_CHUNK_WIDTH = 64

EMPTY_SEQUENCE = EncodedSequence(codes=b"", length=0, source_header="<padding>")


def _advance_column(H: np.ndarray, E: np.ndarray, substitution: np.ndarray,
        gap_open: int, gap_extend: int, offsets: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    One subject column of the recurrence on 64-bit arrays of length m + 1 (index 0 is
    the boundary row). Returns the new (H, E, F) columns.
    """
    E_new = np.maximum(H - gap_open, E - gap_extend)
    E_new[0] = NEG_INF

    H_partial = np.zeros_like(H)
    np.maximum(H[:-1] + substitution, E_new[1:], out=H_partial[1:])
    np.maximum(H_partial, 0, out=H_partial)

    F = np.full_like(H, NEG_INF)
    running = np.maximum.accumulate(H_partial + offsets)
    F[1:] = running[:-1] - gap_open - offsets[:-1]

    H_new = np.maximum(H_partial, F)
    H_new[0] = 0
    return H_new, E_new, F


@grepr_dataclass(eq=False, order=False)
class DpState(HasGreprValidate):
    """
    Linear-space DP state of one (query, subject) pair: the current H and E columns
    over the query (index 0 is the boundary row) and the running best score.
    `F_cell` holds the gap-layer cell along the query for every position of the last
    column (same layout as H_row), kept for tracebacks.
    """
    H_row: np.ndarray
    E_row: np.ndarray
    F_cell: np.ndarray
    best: int = 0

    @classmethod
    def initial(cls, query_length: int) -> DpState:
        return cls(
            H_row=np.zeros(query_length + 1, dtype=np.int64),
            E_row=np.full(query_length + 1, NEG_INF, dtype=np.int64),
            F_cell=np.full(query_length + 1, NEG_INF, dtype=np.int64),
        )

    def post_validate(self, path: AbstractTreePath) -> None:
        VA.VA_MIN(self, path, "best", 0)
        VA.VA_EXACT_LEN(self, path, "E_row", len(self.H_row))
        VA.VA_EXACT_LEN(self, path, "F_cell", len(self.H_row))
        if self.H_row.size and int(self.H_row.min()) < 0:
            raise SW_RangeValidationError(path.add_attribute("H_row"), "H values must not be negative")

    def advance(self, substitution: np.ndarray, gaps: GapModel, offsets: np.ndarray) -> None:
        """Consume one subject residue given its profile row over the query."""
        self.H_row, self.E_row, self.F_cell = _advance_column(
            self.H_row, self.E_row, substitution, gaps.open_penalty, gaps.extend_penalty, offsets,
        )
        self.best = max(self.best, int(self.H_row.max()))


def _gap_offsets(length: int, gap_extend: int) -> np.ndarray:
    return np.arange(length + 1, dtype=np.int64) * gap_extend

def _profile_rows64(profile_rows: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(profile_rows, dtype=np.int64)

def _scalar_best(rows64: np.ndarray, subject: np.ndarray, gaps: GapModel) -> int:
    query_length = rows64.shape[1]
    if query_length == 0 or subject.size == 0:
        return 0
    state = DpState.initial(query_length)
    offsets = _gap_offsets(query_length, gaps.extend_penalty)
    for code in subject:
        state.advance(rows64[code], gaps, offsets)
    return state.best

@enforce_argument_types
def sw_score_scalar(query: EncodedSequence, subject: EncodedSequence, matrix: ScoringMatrix, gaps: GapModel) -> int:
    """
    Optimal local alignment score of one pair: the reference kernel every other kernel
    is checked against. Deterministic, linear space, never negative.
    """
    profile = make_profile(matrix, query)
    return _scalar_best(_profile_rows64(profile.rows), subject.array, gaps)

@enforce_argument_types
def sw_score_reference(query: EncodedSequence, subject: EncodedSequence, matrix: ScoringMatrix, gaps: GapModel) -> int:
    """Literal cell-by-cell evaluation of the three-layer recurrence. Slow; for small inputs."""
    table = matrix.scores
    gap_open, gap_extend = gaps.open_penalty, gaps.extend_penalty
    m = query.length
    H_prev = [0] * (m + 1)
    E_prev = [NEG_INF] * (m + 1)
    best = 0
    for s in subject.codes:
        H_cur = [0] * (m + 1)
        E_cur = [NEG_INF] * (m + 1)
        F_cell = NEG_INF
        for i in range(1, m + 1):
            E_cur[i] = max(H_prev[i] - gap_open, E_prev[i] - gap_extend)
            F_cell = max(H_cur[i - 1] - gap_open, F_cell - gap_extend)
            H_cur[i] = max(0, H_prev[i - 1] + table[query.codes[i - 1]][s], E_cur[i], F_cell)
            best = max(best, H_cur[i])
        H_prev, E_prev = H_cur, E_cur
    return best


@grepr_dataclass(frozen=True, eq=False, order=False)
class LaneBatch(HasGreprValidate):
    """
    Up to `lane_width` independent subjects scored together against one query. Lane k
    owns subject k; lanes never exchange data. Row k of the kernel's 2-D state arrays
    is lane k's DP state.
    """
    lane_width: int
    subjects: tuple[EncodedSequence, ...]

    @classmethod
    def from_subjects(cls, subjects: Sequence[EncodedSequence], lane_width: int) -> LaneBatch:
        """Fill lanes in order, padding unused lanes with empty sequences."""
        subjects = tuple(subjects)
        padding = (EMPTY_SEQUENCE,) * max(0, lane_width - len(subjects))
        batch = cls(lane_width=lane_width, subjects=subjects + padding)
        batch.validate()
        return batch

    def post_validate(self, path: AbstractTreePath) -> None:
        VA.VA_MIN(self, path, "lane_width", 1)
        VA.VA_EXACT_LEN(self, path, "subjects", self.lane_width)

    @cached_property
    def lengths(self) -> np.ndarray:
        return np.array([subject.length for subject in self.subjects], dtype=np.int64)

    @cached_property
    def code_matrix(self) -> np.ndarray:
        """(lane_width, longest subject) uint8 codes, zero padded."""
        codes = np.zeros((self.lane_width, int(self.lengths.max(initial=0))), dtype=np.uint8)
        for lane, subject in enumerate(self.subjects):
            codes[lane, :subject.length] = subject.array
        return codes


def _saturate(values: np.ndarray, limit: int) -> np.ndarray:
    return np.clip(values, INT16_MIN, limit).astype(np.int16)

def _batch_scores(profile_rows: np.ndarray, code_matrix: np.ndarray, lengths: np.ndarray,
        gaps: GapModel, saturation_limit: int = INT16_MAX) -> tuple[list[int], list[int]]:
    """
    Inter-task kernel: lanes on axis 0, query on axis 1, one subject column per step.
    State is stored as saturating int16; sums are formed in int32 and clipped back.
    Returns (scores, indices of lanes recomputed with the scalar kernel).
    """
    lane_width = code_matrix.shape[0]
    query_length = profile_rows.shape[1]
    if query_length == 0 or lane_width == 0 or int(lengths.max(initial=0)) == 0:
        return [0] * lane_width, []

    gap_open, gap_extend = gaps.open_penalty, gaps.extend_penalty
    profile16 = np.clip(profile_rows, INT16_MIN, INT16_MAX).astype(np.int16)
    offsets = np.arange(query_length + 1, dtype=np.int32) * gap_extend
    H = np.zeros((lane_width, query_length + 1), dtype=np.int16)
    E = np.full((lane_width, query_length + 1), INT16_MIN, dtype=np.int16)
    best = np.zeros(lane_width, dtype=np.int32)
    H_partial = np.zeros((lane_width, query_length + 1), dtype=np.int32)
    F = np.full((lane_width, query_length + 1), INT16_MIN, dtype=np.int32)

    for j in range(code_matrix.shape[1]):
        H32 = H.astype(np.int32)
        E32 = np.maximum(H32 - gap_open, E.astype(np.int32) - gap_extend)

        np.maximum(H32[:, :-1] + profile16[code_matrix[:, j]], E32[:, 1:], out=H_partial[:, 1:])
        np.maximum(H_partial, 0, out=H_partial)

        running = np.maximum.accumulate(H_partial + offsets, axis=1)
        F[:, 1:] = running[:, :-1] - gap_open - offsets[:-1]

        H_new = np.maximum(H_partial, F)
        H_new[:, 0] = 0
        column_best = np.minimum(H_new.max(axis=1), saturation_limit)
        active = lengths > j
        best = np.where(active, np.maximum(best, column_best), best)

        H = _saturate(H_new, saturation_limit)
        E = _saturate(E32, saturation_limit)

    scores = [int(score) for score in best]
    saturated = [lane for lane in range(lane_width) if scores[lane] >= saturation_limit]
    if saturated:
        rows64 = _profile_rows64(profile_rows)
        for lane in saturated:
            scores[lane] = _scalar_best(rows64, code_matrix[lane, :lengths[lane]], gaps)
        logger.warning("%d saturated lane(s) recomputed with the scalar kernel", len(saturated))
    return scores, saturated

@enforce_argument_types
def sw_score_batch(profile: QueryProfile, batch: LaneBatch, gaps: GapModel, saturation_limit: int = INT16_MAX) -> list[int]:
    """
    Score every lane of a batch against the profile's query. scores[k] equals
    sw_score_scalar(profile.query, batch.subjects[k], ...) exactly; padded lanes score 0.
    Lanes reaching `saturation_limit` are recomputed in 64-bit arithmetic.
    """
    if not 1 <= saturation_limit <= INT16_MAX:
        raise ValueError(f"saturation_limit must be within 1..{INT16_MAX}")
    scores, _ = _batch_scores(profile.rows, batch.code_matrix, batch.lengths, gaps, saturation_limit)
    return scores


@grepr_dataclass(frozen=True, order=False)
class WavefrontPlan(HasGreprValidate):
    """
    Intra-task layout of one DP matrix: the query axis is cut into stripes of
    `chunk_width` positions, one per processing element. Stripe k handles subject
    position t - k at step t, so all active stripes lie on one anti-diagonal. After each
    step a stripe publishes its border (H, F) values at its last query position; stripe
    k + 1 consumes exactly that border at the next step.
    """
    query_length: int
    chunk_width: int
    num_stripes: int

    @classmethod
    def for_query(cls, query_length: int, chunk_width: int = DEFAULT_CHUNK_WIDTH) -> WavefrontPlan:
        """Stripe width is chunk_width clamped to the query length (at least 1)."""
        width = min(chunk_width, max(query_length, 1)) if chunk_width >= 1 else chunk_width
        plan = cls(
            query_length=query_length,
            chunk_width=width,
            num_stripes=max(1, -(-query_length // max(width, 1))),
        )
        plan.validate()
        return plan

    def post_validate(self, path: AbstractTreePath) -> None:
        VA.VA_MIN(self, path, "query_length", 0)
        VA.VA_MIN(self, path, "chunk_width", 1)
        VA.VA_MIN(self, path, "num_stripes", 1)

    @property
    def padded_length(self) -> int:
        return self.num_stripes * self.chunk_width

    def stripe_bounds(self, stripe: int) -> tuple[int, int]:
        start = stripe * self.chunk_width
        return start, min(start + self.chunk_width, self.query_length)

    def num_steps(self, subject_length: int) -> int:
        return subject_length + self.num_stripes - 1 if subject_length else 0

    def active_stripes(self, step: int, subject_length: int) -> range:
        return range(max(0, step - subject_length + 1), min(self.num_stripes - 1, step) + 1)


def _wavefront_best(rows64: np.ndarray, subject: np.ndarray, gaps: GapModel, plan: WavefrontPlan) -> int:
    query_length, subject_length = plan.query_length, subject.size
    if query_length == 0 or subject_length == 0:
        return 0
    gap_open, gap_extend = gaps.open_penalty, gaps.extend_penalty
    stripes, width = plan.num_stripes, plan.chunk_width

    padded = np.zeros((rows64.shape[0], plan.padded_length), dtype=np.int64)
    padded[:, :query_length] = rows64
    striped_profile = padded.reshape(rows64.shape[0], stripes, width)
    real_cells = (np.arange(plan.padded_length) < query_length).reshape(stripes, width)
    offsets = np.arange(width, dtype=np.int64) * gap_extend

    H_cols = np.zeros((stripes, width), dtype=np.int64)
    E_cols = np.full((stripes, width), NEG_INF, dtype=np.int64)
    diag_border = np.zeros(stripes, dtype=np.int64)
    border_H = np.zeros(stripes, dtype=np.int64)
    border_F = np.full(stripes, NEG_INF, dtype=np.int64)
    best = 0

    for step in range(plan.num_steps(subject_length)):
        active = plan.active_stripes(step, subject_length)
        lo, hi = active.start, active.stop
        stripe_ids = np.arange(lo, hi)
        substitution = striped_profile[subject[step - stripe_ids], stripe_ids]

        H_prev = H_cols[lo:hi]
        E_new = np.maximum(H_prev - gap_open, E_cols[lo:hi] - gap_extend)

        diagonal = np.empty_like(H_prev)
        diagonal[:, 0] = diag_border[lo:hi]
        diagonal[:, 1:] = H_prev[:, :-1]
        H_partial = np.maximum(np.maximum(diagonal + substitution, E_new), 0)

        # border produced by the left neighbour at the previous step
        incoming_H = np.empty(hi - lo, dtype=np.int64)
        incoming_F = np.empty(hi - lo, dtype=np.int64)
        if lo == 0:
            incoming_H[0], incoming_F[0] = 0, NEG_INF
            incoming_H[1:], incoming_F[1:] = border_H[0:hi - 1], border_F[0:hi - 1]
        else:
            incoming_H[:], incoming_F[:] = border_H[lo - 1:hi - 1], border_F[lo - 1:hi - 1]

        F = np.maximum(incoming_H - gap_open, incoming_F - gap_extend)[:, None] - offsets[None, :]
        if width > 1:
            running = np.maximum.accumulate(H_partial + offsets, axis=1)
            np.maximum(F[:, 1:], running[:, :-1] - gap_open - offsets[:-1], out=F[:, 1:])

        H_new = np.maximum(H_partial, F)
        best = max(best, int(np.where(real_cells[lo:hi], H_new, 0).max()))

        H_cols[lo:hi] = H_new
        E_cols[lo:hi] = E_new
        diag_border[lo:hi] = incoming_H
        border_H[lo:hi] = H_new[:, -1]
        border_F[lo:hi] = F[:, -1]
    return best

@enforce_argument_types
def sw_score_wavefront(query: EncodedSequence, subject: EncodedSequence, matrix: ScoringMatrix, gaps: GapModel,
        chunk_width: int = DEFAULT_CHUNK_WIDTH) -> int:
    """
    Intra-task kernel: stripes of `chunk_width` query positions advance along
    anti-diagonals and hand their border (H, F) column to the next stripe. Equal to
    sw_score_scalar for every chunk_width >= 1.
    """
    plan = WavefrontPlan.for_query(query.length, chunk_width)
    profile = make_profile(matrix, query)
    return _wavefront_best(_profile_rows64(profile.rows), subject.array, gaps, plan)


__all__ = [
    "NEG_INF", "INT16_MAX", "DEFAULT_LANE_WIDTH", "DEFAULT_CHUNK_WIDTH", "EMPTY_SEQUENCE",
    "DpState", "LaneBatch", "WavefrontPlan",
    "sw_score_scalar", "sw_score_reference", "sw_score_batch", "sw_score_wavefront",
]
