"""
Database search driver: routes subjects to the lane (inter-task) or wavefront
(intra-task) kernel by length, hands out work through a shared claim queue and merges
worker-private hit lists into one deterministic ranking.
"""
from __future__          import annotations
import heapq
import logging
import threading
from collections         import deque
from concurrent.futures  import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses         import replace
from itertools           import islice
from typing              import Callable, Iterable, Sequence

from swsearch.alignment  import DEFAULT_MEMORY_CAP, Alignment, sw_align_traceback
from swsearch.base       import grepr_dataclass, field, AbstractTreePath, HasGreprValidate
from swsearch.decorators import enforce_argument_types
from swsearch.errors     import SW_InvalidValueError
from swsearch.kernels    import (
    DEFAULT_CHUNK_WIDTH, DEFAULT_LANE_WIDTH, INT16_MAX,
    LaneBatch, WavefrontPlan, _batch_scores, _profile_rows64, _scalar_best, _wavefront_best,
)
from swsearch.repr       import GEnum
from swsearch.scoring    import GapModel, ScoringMatrix, make_profile
from swsearch.seqio      import EncodedSequence, SequenceDatabase
from swsearch.validation import ValidateAttribute as VA


logger = logging.getLogger(__name__)

DEFAULT_LENGTH_THRESHOLD = 3000
DEFAULT_TOP_K = 10
DEFAULT_WORKER_COUNT = 1
DEFAULT_CPU_POOL_THREADS = 1
SHORT_CHUNK_BATCHES = 16


class Route(GEnum):
    INTER_TASK = "inter-task"
    INTRA_TASK = "intra-task"

class Backend(GEnum):
    """Where chunks are scored. Workers always claim from the queue in this process."""
    THREADS = "threads"
    PROCESSES = "processes"


@grepr_dataclass(frozen=True)
class SearchConfig(HasGreprValidate):
    """
    Knobs of one database search.

    worker_count intra-task workers run the wavefront kernel and steal lane chunks once
    the long pool is drained; cpu_pool_threads dedicated workers only run the lane
    kernel (0 disables that pool). With the PROCESSES backend every worker hands its
    claimed chunks to a process pool of the same size, so the numpy kernels run outside
    this interpreter's GIL; THREADS scores in the worker threads themselves. None of
    the knobs except top_k and length_threshold can change the results.
    """
    worker_count: int = DEFAULT_WORKER_COUNT
    lane_width: int = DEFAULT_LANE_WIDTH
    chunk_width: int = DEFAULT_CHUNK_WIDTH
    length_threshold: int = DEFAULT_LENGTH_THRESHOLD
    top_k: int = DEFAULT_TOP_K
    cpu_pool_threads: int = DEFAULT_CPU_POOL_THREADS
    memory_cap: int = DEFAULT_MEMORY_CAP
    with_alignments: bool = True
    saturation_limit: int = INT16_MAX
    backend: Backend = Backend.PROCESSES

    def post_validate(self, path: AbstractTreePath) -> None:
        VA.VA_MIN(self, path, "worker_count", 1)
        VA.VA_MIN(self, path, "lane_width", 1)
        VA.VA_MIN(self, path, "chunk_width", 1)
        VA.VA_MIN(self, path, "length_threshold", 0)
        VA.VA_MIN(self, path, "top_k", 1)
        VA.VA_MIN(self, path, "cpu_pool_threads", 0)
        VA.VA_MIN(self, path, "memory_cap", 0)
        VA.VA_RANGE(self, path, "saturation_limit", 1, INT16_MAX)

    @property
    def short_chunk_size(self) -> int:
        return self.lane_width * SHORT_CHUNK_BATCHES

    @property
    def runs_inline(self) -> bool:
        return self.worker_count == 1 and self.cpu_pool_threads == 0


@grepr_dataclass(frozen=True, order=False)
class WorkChunk(HasGreprValidate):
    """
    A claimable unit of work: positions [start, end) of its route's pool, with the
    database indices they stand for.
    """
    route: Route
    start: int
    end: int
    db_indices: tuple[int, ...]

    def post_validate(self, path: AbstractTreePath) -> None:
        VA.VA_MIN(self, path, "start", 0)
        VA.VA_LESS_THAN(self, path, "start", self.end, condition="chunks are never empty")
        VA.VA_EXACT_LEN(self, path, "db_indices", self.end - self.start)

    def __len__(self) -> int:
        return self.end - self.start

class ChunkQueue:
    """
    Shared queue of work chunks. Every claim is serialised by one lock, so each chunk is
    handed out exactly once no matter how many workers claim concurrently.
    """

    def __init__(self, chunks: Iterable[WorkChunk]) -> None:
        self._lock = threading.Lock()
        self._pending: dict[Route, deque[tuple[int, WorkChunk]]] = {route: deque() for route in Route}
        self.size = 0
        for ordinal, chunk in enumerate(chunks):
            self._pending[chunk.route].append((ordinal, chunk))
            self.size += 1

    @classmethod
    def from_pools(cls, short_pool: Sequence[int], long_pool: Sequence[int], config: SearchConfig) -> ChunkQueue:
        """Long-pool chunks first (single sequences), then short-pool chunks of lane_width x 16 subjects."""
        chunks = [
            WorkChunk(route=Route.INTRA_TASK, start=position, end=position + 1, db_indices=(db_index,))
            for position, db_index in enumerate(long_pool)
        ]
        step = config.short_chunk_size
        for start in range(0, len(short_pool), step):
            end = min(start + step, len(short_pool))
            chunks.append(WorkChunk(route=Route.INTER_TASK, start=start, end=end, db_indices=tuple(short_pool[start:end])))
        return cls(chunks)

    def claim(self, route: Route | None = None) -> WorkChunk | None:
        with self._lock:
            if route is not None:
                pending = self._pending[route]
                return pending.popleft()[1] if pending else None
            heads = [pending for pending in self._pending.values() if pending]
            if not heads:
                return None
            return min(heads, key=lambda pending: pending[0][0]).popleft()[1]

    def remaining(self) -> int:
        with self._lock:
            return sum(len(pending) for pending in self._pending.values())


def claim_chunk(queue: ChunkQueue, route: Route | None = None) -> WorkChunk | None:
    """Claim the next chunk (of one route, or in queue order); None once exhausted."""
    return queue.claim(route)


@grepr_dataclass(frozen=True, order=False)
class Hit(HasGreprValidate):
    db_index: int
    score: int
    alignment: Alignment | None = None

    def post_validate(self, path: AbstractTreePath) -> None:
        VA.VA_MIN(self, path, "db_index", 0)
        VA.VA_MIN(self, path, "score", 0)

    @property
    def rank_key(self) -> tuple[int, int]:
        return (-self.score, self.db_index)

@grepr_dataclass(frozen=True)
class SearchStats(HasGreprValidate):
    """Work counters of one search. Scheduling dependent, so never part of result equality."""
    cells: int = 0
    inter_task_chunks: int = 0
    intra_task_chunks: int = 0
    stolen_chunks: int = 0
    lane_batches: int = 0
    recomputed_lanes: int = 0

    @classmethod
    def combine(cls, parts: Iterable[SearchStats]) -> SearchStats:
        parts = list(parts)
        return cls(**{name: sum(getattr(part, name) for part in parts) for name in cls.__dataclass_fields__})

@grepr_dataclass(frozen=True, order=False)
class RankedResults(HasGreprValidate):
    """Hits ordered by score descending then db_index ascending, at most top_k of them."""
    hits: tuple[Hit, ...]
    top_k: int
    stats: SearchStats | None = field(default=None, compare=False, grepr=False)

    def post_validate(self, path: AbstractTreePath) -> None:
        VA.VA_MIN(self, path, "top_k", 1)
        if len(self.hits) > self.top_k:
            raise SW_InvalidValueError(path.add_attribute("hits"), f"{len(self.hits)} hits exceed top_k={self.top_k}")
        keys = [hit.rank_key for hit in self.hits]
        if keys != sorted(keys):
            raise SW_InvalidValueError(path.add_attribute("hits"), "hits are not ordered by (score desc, db_index asc)")
        if len({hit.db_index for hit in self.hits}) != len(self.hits):
            raise SW_InvalidValueError(path.add_attribute("hits"), "duplicated db_index")

    def __len__(self) -> int:
        return len(self.hits)


@enforce_argument_types
def partition_database(db: SequenceDatabase, threshold: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """
    Split database indices by length: length < threshold goes to the short pool (lane
    kernel), the rest to the long pool (wavefront kernel). The short pool is ordered by
    (length, index) so lane batches hold similar lengths; the long pool longest first.
    """
    if threshold < 0:
        raise ValueError(f"threshold must be at least 0 not {threshold}")
    lengths = db.lengths
    short = sorted((i for i in range(db.num_sequences) if lengths[i] < threshold), key=lambda i: (int(lengths[i]), i))
    long = sorted((i for i in range(db.num_sequences) if lengths[i] >= threshold), key=lambda i: (-int(lengths[i]), i))
    return tuple(short), tuple(long)


class _SearchContext:
    """Read-only inputs shared by all workers of one search."""

    def __init__(self, query: EncodedSequence, db: SequenceDatabase, matrix: ScoringMatrix,
            gaps: GapModel, config: SearchConfig) -> None:
        self.db = db
        self.code_arrays = db.code_arrays
        self.gaps = gaps
        self.config = config
        self.profile_rows = make_profile(matrix, query).rows
        self.rows64 = _profile_rows64(self.profile_rows)
        self.plan = WavefrontPlan.for_query(query.length, config.chunk_width)

    def score_inter_task(self, chunk: WorkChunk) -> tuple[list[Hit], SearchStats]:
        hits: list[Hit] = []
        recomputed = batches = 0
        width = self.config.lane_width
        for start in range(0, len(chunk.db_indices), width):
            indices = chunk.db_indices[start:start + width]
            batch = LaneBatch.from_subjects([self.db[i] for i in indices], width)
            scores, saturated = _batch_scores(
                self.profile_rows, batch.code_matrix, batch.lengths, self.gaps, self.config.saturation_limit,
            )
            hits.extend(Hit(db_index=i, score=score) for i, score in zip(indices, scores))
            recomputed += len(saturated)
            batches += 1
        cells = self.plan.query_length * sum(self.db[i].length for i in chunk.db_indices)
        return hits, SearchStats(cells=cells, inter_task_chunks=1, lane_batches=batches, recomputed_lanes=recomputed)

    def score_intra_task(self, chunk: WorkChunk) -> tuple[list[Hit], SearchStats]:
        hits = []
        for i in chunk.db_indices:
            hits.append(Hit(db_index=i, score=_wavefront_best(self.rows64, self.code_arrays[i], self.gaps, self.plan)))
        cells = self.plan.query_length * sum(self.db[i].length for i in chunk.db_indices)
        return hits, SearchStats(cells=cells, intra_task_chunks=1)

    def score(self, chunk: WorkChunk) -> tuple[list[Hit], SearchStats]:
        if chunk.route is Route.INTER_TASK:
            return self.score_inter_task(chunk)
        return self.score_intra_task(chunk)


_process_context: _SearchContext | None = None

def _install_process_context(context: _SearchContext) -> None:
    global _process_context
    _process_context = context

def _process_ready() -> bool:
    return _process_context is not None

def _score_in_process(chunk: WorkChunk) -> tuple[list[Hit], SearchStats]:
    return _process_context.score(chunk)


type ChunkScorer = Callable[[WorkChunk], tuple[list[Hit], SearchStats]]

def _drain(score: ChunkScorer, queue: ChunkQueue, routes: tuple[Route, ...], name: str) -> tuple[list[Hit], SearchStats]:
    """Worker loop: claim from the routes in preference order until all are exhausted."""
    hits: list[Hit] = []
    stats = [SearchStats()]
    for preference, route in enumerate(routes):
        while (chunk := claim_chunk(queue, route)) is not None:
            chunk_hits, chunk_stats = score(chunk)
            hits.extend(chunk_hits)
            stats.append(chunk_stats)
            if preference > 0:
                stats.append(SearchStats(stolen_chunks=1))
            logger.debug("%s scored %s chunk [%d, %d)", name, chunk.route.value, chunk.start, chunk.end)
    hits.sort(key=lambda hit: hit.rank_key)
    return hits, SearchStats.combine(stats)

def _run_workers(context: _SearchContext, queue: ChunkQueue, config: SearchConfig) -> tuple[list[list[Hit]], SearchStats]:
    both_routes = (Route.INTRA_TASK, Route.INTER_TASK)
    if config.runs_inline:
        hits, stats = _drain(context.score, queue, both_routes, "inline worker")
        return [hits], stats

    jobs = [(both_routes, f"intra-task worker {n}") for n in range(config.worker_count)]
    jobs += [((Route.INTER_TASK,), f"inter-task worker {n}") for n in range(config.cpu_pool_threads)]
    if config.backend is Backend.THREADS:
        return _run_jobs(jobs, context.score, queue)

    with ProcessPoolExecutor(max_workers=len(jobs), initializer=_install_process_context, initargs=(context,)) as pool:
        # under the fork start method the first submit launches every process; it must
        # happen before this search starts any thread
        if not pool.submit(_process_ready).result():
            raise RuntimeError("scoring process started without a search context")
        return _run_jobs(jobs, lambda chunk: pool.submit(_score_in_process, chunk).result(), queue)

def _run_jobs(jobs: list[tuple[tuple[Route, ...], str]], score: ChunkScorer,
        queue: ChunkQueue) -> tuple[list[list[Hit]], SearchStats]:
    with ThreadPoolExecutor(max_workers=len(jobs), thread_name_prefix="swsearch") as executor:
        futures = [executor.submit(_drain, score, queue, routes, name) for routes, name in jobs]
        outcomes = [future.result() for future in futures]
    return [hits for hits, _ in outcomes], SearchStats.combine(stats for _, stats in outcomes)


@enforce_argument_types
def merge_results(partials: Sequence[Sequence[Hit]], top_k: int) -> RankedResults:
    """Merge locally ordered hit lists into the global (score desc, db_index asc) order, keeping top_k."""
    merged = heapq.merge(*partials, key=lambda hit: hit.rank_key)
    results = RankedResults(hits=tuple(islice(merged, top_k)), top_k=top_k)
    results.validate()
    return results

@enforce_argument_types
def attach_alignments(results: RankedResults, query: EncodedSequence, db: SequenceDatabase,
        matrix: ScoringMatrix, gaps: GapModel, memory_cap: int = DEFAULT_MEMORY_CAP) -> RankedResults:
    """Compute the traceback of every retained hit."""
    hits = tuple(
        replace(hit, alignment=sw_align_traceback(query, db[hit.db_index], matrix, gaps, memory_cap))
        for hit in results.hits
    )
    return replace(results, hits=hits)

@enforce_argument_types
def scalar_scan(query: EncodedSequence, db: SequenceDatabase, matrix: ScoringMatrix, gaps: GapModel, top_k: int) -> RankedResults:
    """Sequential scalar-kernel scan of the whole database: the reference ranking for run_search."""
    rows64 = _profile_rows64(make_profile(matrix, query).rows)
    hits = [Hit(db_index=i, score=_scalar_best(rows64, codes, gaps)) for i, codes in enumerate(db.code_arrays)]
    hits.sort(key=lambda hit: hit.rank_key)
    return merge_results([hits], top_k)

@enforce_argument_types
def run_search(query: EncodedSequence, db: SequenceDatabase, matrix: ScoringMatrix, gaps: GapModel,
        config: SearchConfig) -> RankedResults:
    """
    Score the query against every database sequence and return the top_k hits.

    The ranking equals scalar_scan(query, db, matrix, gaps, config.top_k) for every
    config; alignments are computed afterwards for the retained hits only.

    Raises:
        SW_EncodingError: if the query holds codes outside the matrix alphabet
    """
    config.validate()
    context = _SearchContext(query, db, matrix, gaps, config)
    short_pool, long_pool = partition_database(db, config.length_threshold)
    queue = ChunkQueue.from_pools(short_pool, long_pool, config)
    logger.debug("query %r: %d short, %d long sequence(s), %d chunk(s)",
        query.source_header, len(short_pool), len(long_pool), queue.size)

    partials, stats = _run_workers(context, queue, config)
    if queue.remaining():
        raise RuntimeError(f"{queue.remaining()} of {queue.size} chunk(s) left unclaimed")
    results = merge_results(partials, config.top_k)
    if config.with_alignments:
        results = attach_alignments(results, query, db, matrix, gaps, config.memory_cap)
    logger.info("query %r: %d cells, %d hit(s) kept, %d lane(s) recomputed",
        query.source_header, stats.cells, len(results), stats.recomputed_lanes)
    return replace(results, stats=stats)


__all__ = [
    "DEFAULT_LENGTH_THRESHOLD", "DEFAULT_TOP_K", "DEFAULT_WORKER_COUNT", "DEFAULT_CPU_POOL_THREADS",
    "SHORT_CHUNK_BATCHES", "Route", "Backend", "SearchConfig", "WorkChunk", "ChunkQueue", "claim_chunk",
    "Hit", "SearchStats", "RankedResults",
    "partition_database", "merge_results", "attach_alignments", "scalar_scan", "run_search",
]
