from __future__ import annotations
import itertools
import random
import threading
from functools import cache

import pytest

from swsearch import scheduler
from swsearch.errors import SW_InvalidValueError, SW_RangeValidationError, SW_EncodingError
from swsearch.kernels import sw_score_scalar
from swsearch.scheduler import (
    Backend, ChunkQueue, Hit, RankedResults, Route, SearchConfig, SearchStats, WorkChunk,
    claim_chunk, merge_results, partition_database, run_search, scalar_scan,
)
from swsearch.scoring import GapModel, builtin_blosum62
from swsearch.seqio import EncodedSequence, SequenceDatabase

from sw_oracles import encoded, random_database, random_encoded


BLOSUM62 = builtin_blosum62()
GAPS = GapModel(10, 2)
GRID_DB = random_database(random.Random(51), 200, 1, 100)
GRID_QUERY = random_encoded(random.Random(52), 30, header="grid_query")
GRID_TOP_K = 15


@cache
def grid_reference() -> RankedResults:
    return scalar_scan(GRID_QUERY, GRID_DB, BLOSUM62, GAPS, GRID_TOP_K)

def database_of_lengths(*lengths: int) -> SequenceDatabase:
    return SequenceDatabase.from_sequences(encoded("A" * length, f"len{length}_{n}") for n, length in enumerate(lengths))


class TestPartitionDatabase:
    """Test partition_database."""

    def test_threshold_boundary(self):
        """Test that length == threshold goes to the long pool."""
        db = database_of_lengths(5, 3, 10, 3, 0)
        short, long = partition_database(db, 5)
        assert short == (4, 1, 3)
        assert long == (2, 0)

    def test_threshold_zero(self):
        """Test that threshold 0 sends everything to the long pool."""
        short, long = partition_database(database_of_lengths(2, 0, 7), 0)
        assert short == ()
        assert long == (2, 0, 1)

    def test_every_index_once(self):
        """Test that the pools split the database without loss or overlap."""
        short, long = partition_database(GRID_DB, 50)
        assert sorted(short + long) == list(range(GRID_DB.num_sequences))
        assert all(GRID_DB[i].length < 50 for i in short)
        assert all(GRID_DB[i].length >= 50 for i in long)

    def test_negative_threshold(self):
        """Test threshold validation."""
        with pytest.raises(ValueError):
            partition_database(GRID_DB, -1)


class TestChunkQueue:
    """Test ChunkQueue and claim_chunk."""

    def test_from_pools_order(self):
        """Test long-pool chunks first, then short-pool chunks of lane_width x 16."""
        config = SearchConfig(lane_width=2)
        queue = ChunkQueue.from_pools(tuple(range(40)), (90, 91), config)
        assert queue.size == 4
        chunks = []
        while (chunk := claim_chunk(queue)) is not None:
            chunks.append(chunk)
        assert [chunk.route for chunk in chunks] == [Route.INTRA_TASK, Route.INTRA_TASK, Route.INTER_TASK, Route.INTER_TASK]
        assert chunks[0].db_indices == (90,)
        assert [(chunk.start, chunk.end) for chunk in chunks[2:]] == [(0, 32), (32, 40)]
        assert chunks[3].db_indices == tuple(range(32, 40))
        assert len(chunks[2]) == 32

    def test_claim_by_route(self):
        """Test claiming from one route only."""
        queue = ChunkQueue.from_pools((1, 2), (0,), SearchConfig(lane_width=1))
        assert claim_chunk(queue, Route.INTER_TASK).db_indices == (1, 2)
        assert claim_chunk(queue, Route.INTER_TASK) is None
        assert queue.remaining() == 1
        assert claim_chunk(queue, Route.INTRA_TASK).db_indices == (0,)
        assert claim_chunk(queue) is None
        assert queue.remaining() == 0

    def test_empty_queue(self):
        """Test a queue without chunks."""
        queue = ChunkQueue.from_pools((), (), SearchConfig())
        assert queue.size == 0
        assert claim_chunk(queue) is None

    @pytest.mark.parametrize("threads", [1, 4])
    def test_every_chunk_claimed_once(self, threads):
        """Test concurrent claims: each chunk goes to exactly one claimer."""
        chunks = [WorkChunk(route=Route.INTER_TASK, start=n, end=n + 1, db_indices=(n,)) for n in range(500)]
        queue = ChunkQueue(chunks)
        claimed: list[list[int]] = [[] for _ in range(threads)]
        barrier = threading.Barrier(threads)

        def claimer(slot: int) -> None:
            barrier.wait()
            while (chunk := claim_chunk(queue)) is not None:
                claimed[slot].append(chunk.start)

        workers = [threading.Thread(target=claimer, args=(slot,)) for slot in range(threads)]
        for worker in workers:
            worker.start()
        for worker in workers:
            worker.join()
        assert sorted(itertools.chain.from_iterable(claimed)) == list(range(500))

    def test_chunk_validation(self):
        """Test that chunk indices must match the range."""
        with pytest.raises(SW_RangeValidationError):
            WorkChunk(route=Route.INTER_TASK, start=0, end=2, db_indices=(5,)).validate()

    def test_empty_chunk_rejected(self):
        """Test that a chunk must cover at least one position."""
        with pytest.raises(SW_RangeValidationError):
            WorkChunk(route=Route.INTRA_TASK, start=3, end=3, db_indices=()).validate()


class TestMergeResults:
    """Test merge_results and RankedResults."""

    def test_merge_with_ties(self):
        """Test score descending, then db_index ascending."""
        partials = [
            [Hit(db_index=0, score=5), Hit(db_index=2, score=3)],
            [Hit(db_index=1, score=5), Hit(db_index=3, score=1)],
            [],
        ]
        results = merge_results(partials, 3)
        assert [(hit.db_index, hit.score) for hit in results.hits] == [(0, 5), (1, 5), (2, 3)]
        assert results.top_k == 3

    def test_fewer_hits_than_top_k(self):
        """Test that all hits are kept when there are fewer than top_k."""
        results = merge_results([[Hit(db_index=4, score=0)]], 10)
        assert len(results) == 1

    def test_unordered_results_rejected(self):
        """Test RankedResults ordering validation."""
        with pytest.raises(SW_InvalidValueError):
            RankedResults(hits=(Hit(db_index=1, score=3), Hit(db_index=0, score=3)), top_k=5).validate()

    def test_too_many_hits_rejected(self):
        """Test RankedResults length validation."""
        with pytest.raises(SW_InvalidValueError):
            RankedResults(hits=(Hit(db_index=0, score=3), Hit(db_index=1, score=2)), top_k=1).validate()

    def test_duplicates_rejected(self):
        """Test RankedResults duplicate validation."""
        with pytest.raises(SW_InvalidValueError):
            RankedResults(hits=(Hit(db_index=0, score=3), Hit(db_index=0, score=3)), top_k=5).validate()

    def test_stats_ignored_by_equality(self):
        """Test that work counters never make two rankings differ."""
        hits = (Hit(db_index=0, score=3),)
        assert RankedResults(hits, 5, SearchStats(cells=10)) == RankedResults(hits, 5, SearchStats(cells=99))


class TestSearchConfig:
    """Test SearchConfig."""

    def test_defaults(self):
        """Test the default knobs."""
        config = SearchConfig()
        config.validate()
        assert (config.worker_count, config.lane_width, config.chunk_width) == (1, 16, 64)
        assert (config.length_threshold, config.top_k, config.cpu_pool_threads) == (3000, 10, 1)
        assert config.short_chunk_size == 256
        assert not config.runs_inline
        assert config.backend is Backend.PROCESSES

    @pytest.mark.parametrize("changes", [
        dict(worker_count=0), dict(lane_width=0), dict(chunk_width=0), dict(top_k=0),
        dict(length_threshold=-1), dict(cpu_pool_threads=-1), dict(saturation_limit=0),
        dict(saturation_limit=40000),
    ])
    def test_invalid(self, changes):
        """Test out-of-range knobs."""
        with pytest.raises(SW_RangeValidationError):
            SearchConfig(**changes).validate()

    def test_inline(self):
        """Test that one intra-task worker and no dedicated pool run inline."""
        assert SearchConfig(worker_count=1, cpu_pool_threads=0).runs_inline


class TestRunSearch:
    """Test run_search."""

    @pytest.mark.parametrize("worker_count, lane_width, chunk_width", list(itertools.product([1, 2, 4, 8], [1, 8, 32], [1, 64])))
    def test_matches_scalar_scan(self, worker_count, lane_width, chunk_width):
        """Test that every scheduling configuration ranks like the sequential scalar scan."""
        config = SearchConfig(
            worker_count=worker_count,
            lane_width=lane_width,
            chunk_width=chunk_width,
            length_threshold=50,
            top_k=GRID_TOP_K,
            cpu_pool_threads=(worker_count + lane_width) % 3,
            with_alignments=False,
            backend=Backend.THREADS,
        )
        results = run_search(GRID_QUERY, GRID_DB, BLOSUM62, GAPS, config)
        assert results == grid_reference()
        assert results.stats.cells == GRID_QUERY.length * GRID_DB.total_residues

    @pytest.mark.parametrize("worker_count, cpu_pool_threads", [(1, 1), (2, 0), (4, 2), (8, 1)])
    def test_process_backend_matches_scalar_scan(self, worker_count, cpu_pool_threads):
        """Test that scoring in worker processes ranks like the sequential scalar scan."""
        config = SearchConfig(worker_count=worker_count, cpu_pool_threads=cpu_pool_threads, lane_width=8,
            length_threshold=50, top_k=GRID_TOP_K, with_alignments=False, backend=Backend.PROCESSES)
        results = run_search(GRID_QUERY, GRID_DB, BLOSUM62, GAPS, config)
        assert results == grid_reference()
        stats = results.stats
        assert stats.cells == GRID_QUERY.length * GRID_DB.total_residues
        assert stats.inter_task_chunks + stats.intra_task_chunks == ChunkQueue.from_pools(*partition_database(GRID_DB, 50), config).size

    @pytest.mark.parametrize("lane_width", [4, 8, 16, 32, 64])
    def test_lane_width_does_not_change_ranking(self, lane_width):
        """Test identical rankings over the lane widths a sweep visits."""
        config = SearchConfig(lane_width=lane_width, length_threshold=50, top_k=GRID_TOP_K, with_alignments=False,
            backend=Backend.THREADS)
        assert run_search(GRID_QUERY, GRID_DB, BLOSUM62, GAPS, config) == grid_reference()

    def test_saturation_limit_does_not_change_results(self):
        """Test that recomputed lanes keep the ranking exact."""
        config = SearchConfig(length_threshold=50, top_k=GRID_TOP_K, saturation_limit=5, with_alignments=False)
        results = run_search(GRID_QUERY, GRID_DB, BLOSUM62, GAPS, config)
        assert results == grid_reference()
        assert results.stats.recomputed_lanes > 0

    def test_unclaimed_chunks_detected(self, monkeypatch):
        """Test that a search fails when workers leave chunks in the queue."""
        monkeypatch.setattr(scheduler, "_run_workers", lambda context, queue, config: ([], SearchStats()))
        with pytest.raises(RuntimeError, match="left unclaimed"):
            run_search(GRID_QUERY, GRID_DB, BLOSUM62, GAPS, SearchConfig(length_threshold=50))

    def test_scalar_scan_scores(self):
        """Test the reference ranking itself against per-pair scores."""
        reference = grid_reference()
        scores = sorted(((-sw_score_scalar(GRID_QUERY, subject, BLOSUM62, GAPS), i) for i, subject in enumerate(GRID_DB.sequences)))
        assert [(hit.db_index, hit.score) for hit in reference.hits] == [(i, -score) for score, i in scores[:GRID_TOP_K]]

    def test_top_one(self):
        """Test the best hit of a tiny database."""
        db = SequenceDatabase.from_sequences([encoded("GGG", "g"), encoded("AAA", "a"), encoded("WAW", "w")])
        results = run_search(encoded("AAA"), db, BLOSUM62, GAPS, SearchConfig(top_k=1, length_threshold=3))
        assert [(hit.db_index, hit.score) for hit in results.hits] == [(1, 12)]
        assert results.hits[0].alignment.operations == "MMM"

    def test_ties_broken_by_index(self):
        """Test equal scores ordered by database index."""
        db = SequenceDatabase.from_sequences([encoded("WW", "a"), encoded("GWWG", "b"), encoded("WW", "c")])
        results = run_search(encoded("WW"), db, BLOSUM62, GAPS, SearchConfig(worker_count=2, lane_width=1, length_threshold=4))
        assert [(hit.db_index, hit.score) for hit in results.hits] == [(0, 22), (1, 22), (2, 22)]

    def test_empty_database(self):
        """Test a search of an empty database."""
        results = run_search(encoded("ARND"), SequenceDatabase.from_sequences([]), BLOSUM62, GAPS, SearchConfig())
        assert results.hits == ()
        assert results.stats.cells == 0

    def test_empty_query(self):
        """Test that an empty query scores 0 against everything."""
        db = database_of_lengths(3, 1)
        results = run_search(encoded(""), db, BLOSUM62, GAPS, SearchConfig(length_threshold=2))
        assert [(hit.db_index, hit.score) for hit in results.hits] == [(0, 0), (1, 0)]

    def test_alignments_attached(self):
        """Test that retained hits carry alignments with the hit score."""
        config = SearchConfig(length_threshold=50, top_k=5)
        results = run_search(GRID_QUERY, GRID_DB, BLOSUM62, GAPS, config)
        for hit in results.hits:
            assert hit.alignment is not None
            assert hit.alignment.score == hit.score

    def test_capped_alignments(self):
        """Test a memory cap below every traceback matrix."""
        config = SearchConfig(length_threshold=50, top_k=3, memory_cap=0)
        results = run_search(GRID_QUERY, GRID_DB, BLOSUM62, GAPS, config)
        assert all(hit.alignment.capped and hit.alignment.score == hit.score for hit in results.hits)

    def test_stats(self):
        """Test work counters of a search without a dedicated inter-task pool."""
        config = SearchConfig(worker_count=2, lane_width=4, length_threshold=50, cpu_pool_threads=0, with_alignments=False)
        short, long = partition_database(GRID_DB, 50)
        stats = run_search(GRID_QUERY, GRID_DB, BLOSUM62, GAPS, config).stats
        short_chunks = -(-len(short) // config.short_chunk_size)
        assert stats.intra_task_chunks == len(long)
        assert stats.inter_task_chunks == short_chunks
        # without a dedicated pool every lane chunk is taken by an intra-task worker
        assert stats.stolen_chunks == short_chunks
        assert stats.lane_batches == -(-len(short) // 4)

    def test_repeatable(self):
        """Test that repeated searches give equal results."""
        config = SearchConfig(worker_count=4, lane_width=2, length_threshold=30, cpu_pool_threads=2, with_alignments=False)
        first = run_search(GRID_QUERY, GRID_DB, BLOSUM62, GAPS, config)
        assert all(run_search(GRID_QUERY, GRID_DB, BLOSUM62, GAPS, config) == first for _ in range(3))

    def test_query_outside_matrix(self):
        """Test a query code the matrix does not cover."""
        query = EncodedSequence(codes=bytes([40]), length=1, source_header="odd")
        with pytest.raises(SW_EncodingError):
            run_search(query, GRID_DB, BLOSUM62, GAPS, SearchConfig())
