from __future__ import annotations
import io
import math
import os
import random
import statistics
from dataclasses import replace

import pytest

from swsearch import bench
from swsearch.bench import (
    BENCHMARK_QUERY_ACCESSIONS, REPORT_COLUMNS, SWISSPROT_2021_04_STATS,
    BenchEnvironment, BenchReport, GcupsMeasure, QueryReportRow, SweepPoint, SweepTable,
    check_workload_trend, emit_csv, emit_sweep_csv, measure_gcups, read_report_csv, read_sweep_csv,
    run_benchmark, sweep_parameter, sweep_query_lengths,
)
from swsearch.errors import (
    SW_MeasurementError, SW_DeterminismViolationError, SW_InvalidValueError, SW_MalformedInputError,
    SW_RangeValidationError,
)
from swsearch.scheduler import Backend, Hit, RankedResults, SearchConfig
from swsearch.kernels import sw_score_scalar
from swsearch.scoring import GapModel, builtin_blosum62
from swsearch.seqio import load_database
from swsearch.synthetic import benchmark_query_lengths, synthetic_database, synthetic_queries

from sw_oracles import FakeClock


BLOSUM62 = builtin_blosum62()
GAPS = GapModel(10, 2)
TINY_DB = synthetic_database(6, seed=5, mean_length=20, max_length=40)
CONFIG = SearchConfig(length_threshold=30, top_k=3, backend=Backend.THREADS)


class ShrinkingClock(FakeClock):
    """Every reading advances less than the previous one, so later searches look faster."""

    def __call__(self) -> float:
        self.step *= 0.9
        return super().__call__()


def report_row(query_id: str, query_length: int, mean: float) -> QueryReportRow:
    return QueryReportRow(query_id=query_id, query_length=query_length, repetitions=1,
        mean_gcups=mean, min_gcups=mean, max_gcups=mean, stddev_gcups=0.0)


class TestMeasureGcups:
    """Test measure_gcups."""

    def test_full_database_rate(self):
        """Test the shortest benchmark query against the whole Swiss-Prot release in one second."""
        measure = measure_gcups(144, SWISSPROT_2021_04_STATS[1], 1.0)
        assert math.isclose(measure.gcups, 29.40095232)
        measure.validate()

    def test_integer_elapsed(self):
        """Test that integer seconds are accepted."""
        assert measure_gcups(1000, 1000000, 2).gcups == 0.5

    @pytest.mark.parametrize("elapsed", [0, 0.0, -1.5])
    def test_non_positive_elapsed(self, elapsed):
        """Test that a clock without progress is rejected."""
        with pytest.raises(SW_MeasurementError):
            measure_gcups(144, 1000, elapsed)

    def test_random_triples(self):
        """Test gcups == query_length * db_residues / (elapsed * 1e9) over many random measurements."""
        rng = random.Random(17)
        for _ in range(10_000):
            query_length, db_residues = rng.randint(1, 40_000), rng.randint(1, 10**11)
            elapsed = rng.uniform(1e-6, 1e4)
            measure = measure_gcups(query_length, db_residues, elapsed)
            assert math.isclose(measure.gcups, query_length * db_residues / (elapsed * 1e9))
            assert (measure.query_length, measure.db_residues, measure.elapsed) == (query_length, db_residues, elapsed)

    def test_inconsistent_record(self):
        """Test that a measure must match its cell count."""
        with pytest.raises(SW_InvalidValueError):
            GcupsMeasure(query_length=10, db_residues=10, elapsed=1.0, gcups=5.0).validate()


class TestQueryReportRow:
    """Test QueryReportRow.from_measures."""

    def test_statistics(self):
        """Test mean, extremes and sample standard deviation."""
        measures = [measure_gcups(100, 10 ** 7, elapsed) for elapsed in (0.5, 1.0, 2.0)]
        row = QueryReportRow.from_measures("q", measures)
        values = [2.0, 1.0, 0.5]
        assert row.repetitions == 3
        assert math.isclose(row.mean_gcups, statistics.fmean(values))
        assert (row.min_gcups, row.max_gcups) == (0.5, 2.0)
        assert math.isclose(row.stddev_gcups, statistics.stdev(values))

    def test_single_repetition(self):
        """Test that one repetition has a standard deviation of 0."""
        row = QueryReportRow.from_measures("q", [measure_gcups(100, 100, 0.25)])
        assert row.stddev_gcups == 0.0
        assert row.mean_gcups == row.min_gcups == row.max_gcups

    def test_equal_values(self):
        """Test that the mean of equal values stays inside [min, max]."""
        row = QueryReportRow.from_measures("q", [measure_gcups(3, 7, 0.1)] * 7)
        assert row.min_gcups <= row.mean_gcups <= row.max_gcups

    def test_mean_outside_range(self):
        """Test row validation."""
        with pytest.raises(SW_RangeValidationError):
            QueryReportRow(query_id="q", query_length=1, repetitions=1, mean_gcups=3.0,
                min_gcups=1.0, max_gcups=2.0, stddev_gcups=0.0).validate()


class TestRunBenchmark:
    """Test run_benchmark with an injected clock."""

    def test_fake_clock(self):
        """Test that only the timed searches read the clock."""
        clock = FakeClock(step=0.5)
        queries = synthetic_queries([12, 30], seed=7, labels=["first", "second"])
        report = run_benchmark(queries, TINY_DB, BLOSUM62, GAPS, CONFIG, 4, warmup=2, clock=clock)
        assert clock.readings == 2 * 4 * 2
        assert [row.query_id for row in report.rows] == ["first", "second"]
        assert [row.query_length for row in report.rows] == [12, 30]
        expected = 30 * TINY_DB.total_residues / 0.5e9
        assert math.isclose(report.rows[1].mean_gcups, expected)
        assert report.rows[1].stddev_gcups == pytest.approx(0.0, abs=1e-12)
        assert len(report.rows[1].measures) == 4
        assert report.repetitions == 4

    def test_environment_and_rankings(self):
        """Test the recorded settings and one reference ranking per query."""
        queries = synthetic_queries([15], seed=8)
        report = run_benchmark(queries, TINY_DB, BLOSUM62, GAPS, CONFIG, 2, warmup=0, clock=FakeClock())
        assert report.environment == BenchEnvironment.describe(CONFIG, TINY_DB)
        assert report.environment.num_sequences == 6
        assert len(report.rankings) == 1
        assert all(hit.alignment is None for hit in report.rankings[0].hits)

    def test_twenty_query_protocol(self):
        """Test 20 queries of 144..5478 residues, one row each, with accession ids."""
        db = synthetic_database(3, seed=9, mean_length=8, max_length=10)
        report = sweep_query_lengths(benchmark_query_lengths(), CONFIG, db, BLOSUM62, GAPS,
            repetitions=20, warmup=0, clock=FakeClock())
        assert [row.query_id for row in report.rows] == list(BENCHMARK_QUERY_ACCESSIONS)
        assert [row.query_length for row in report.rows] == benchmark_query_lengths()
        assert report.repetitions == 20
        assert all(row.repetitions == 20 and len(row.measures) == 20 for row in report.rows)

    def test_default_query_ids(self):
        """Test ids taken from the first header word, with a positional fallback."""
        queries = synthetic_queries([5, 6], seed=3)
        queries[1] = replace(queries[1], source_header="")
        report = run_benchmark(queries, TINY_DB, BLOSUM62, GAPS, CONFIG, 1, warmup=0, clock=FakeClock())
        assert [row.query_id for row in report.rows] == ["query_00", "query_01"]

    @pytest.mark.parametrize("repetitions, warmup", [(0, 1), (1, -1)])
    def test_invalid_protocol(self, repetitions, warmup):
        """Test repetition and warmup validation."""
        with pytest.raises(SW_InvalidValueError):
            run_benchmark(synthetic_queries([5]), TINY_DB, BLOSUM62, GAPS, CONFIG, repetitions, warmup=warmup)

    def test_stopped_clock(self):
        """Test a clock that never advances."""
        with pytest.raises(SW_MeasurementError):
            run_benchmark(synthetic_queries([5]), TINY_DB, BLOSUM62, GAPS, CONFIG, 1, warmup=0, clock=lambda: 1.0)

    def test_determinism_violation(self, monkeypatch):
        """Test that a repetition ranking differently is reported with the query id."""
        searches = []

        def flaky_search(query, db, matrix, gaps, config):
            searches.append(config)
            return RankedResults(hits=(Hit(db_index=len(searches) % 2, score=5),), top_k=config.top_k)

        monkeypatch.setattr(bench, "run_search", flaky_search)
        queries = synthetic_queries([5], labels=["P02232"])
        with pytest.raises(SW_DeterminismViolationError) as exc_info:
            run_benchmark(queries, TINY_DB, BLOSUM62, GAPS, CONFIG, 3, warmup=0, clock=FakeClock())
        assert exc_info.value.query_id == "P02232"
        assert all(not config.with_alignments for config in searches)


class TestSweepParameter:
    """Test sweep_parameter."""

    def test_equal_throughput_flags_first(self):
        """Test one point per value; ties flag the first value."""
        queries = synthetic_queries([10], seed=4)
        table = sweep_parameter("lane_width", [1, 4, 16], CONFIG, queries, TINY_DB, BLOSUM62, GAPS,
            2, warmup=0, clock=FakeClock())
        assert [point.value for point in table.points] == [1, 4, 16]
        assert table.best.value == 1
        assert len(table.reports) == 3

    def test_lane_widths_rank_identically(self):
        """Test that every lane width from 4 to 64 yields the same rankings, equal to the scalar kernel."""
        db = synthetic_database(40, seed=12, mean_length=25, max_length=60)
        queries = synthetic_queries([9, 33], seed=13)
        table = sweep_parameter("lane_width", [4, 8, 16, 32, 64], CONFIG, queries, db, BLOSUM62, GAPS,
            1, warmup=0, clock=FakeClock())
        assert [point.value for point in table.points] == [4, 8, 16, 32, 64]
        assert all(report.rankings == table.reports[0].rankings for report in table.reports)
        for query, ranking in zip(queries, table.reports[0].rankings):
            expected = sorted((-sw_score_scalar(query, subject, BLOSUM62, GAPS), i) for i, subject in enumerate(db.sequences))
            assert [(hit.score, hit.db_index) for hit in ranking.hits] == [(-score, i) for score, i in expected[:CONFIG.top_k]]

    def test_best_value(self):
        """Test that the fastest value is flagged."""
        queries = synthetic_queries([10], seed=4)
        table = sweep_parameter("chunk_width", [8, 16, 32], CONFIG, queries, TINY_DB, BLOSUM62, GAPS,
            1, warmup=0, clock=ShrinkingClock(step=1.0))
        assert [point.is_best for point in table.points] == [False, False, True]
        assert table.best.value == 32

    def test_invalid_parameter(self):
        """Test parameters outside lane_width and chunk_width."""
        with pytest.raises(SW_InvalidValueError):
            sweep_parameter("top_k", [1], CONFIG, synthetic_queries([5]), TINY_DB, BLOSUM62, GAPS, 1)

    def test_no_values(self):
        """Test an empty value list."""
        with pytest.raises(SW_InvalidValueError):
            sweep_parameter("lane_width", [], CONFIG, synthetic_queries([5]), TINY_DB, BLOSUM62, GAPS, 1)

    def test_invalid_value(self):
        """Test a width the search would reject."""
        with pytest.raises(SW_RangeValidationError):
            sweep_parameter("lane_width", [4, 0], CONFIG, synthetic_queries([5]), TINY_DB, BLOSUM62, GAPS,
                1, warmup=0, clock=FakeClock())

    def test_ranking_changes_with_value(self, monkeypatch):
        """Test that a value changing a ranking is a determinism violation."""
        def width_dependent_search(query, db, matrix, gaps, config):
            return RankedResults(hits=(Hit(db_index=config.lane_width, score=5),), top_k=config.top_k)

        monkeypatch.setattr(bench, "run_search", width_dependent_search)
        with pytest.raises(SW_DeterminismViolationError):
            sweep_parameter("lane_width", [1, 2], CONFIG, synthetic_queries([5]), TINY_DB, BLOSUM62, GAPS,
                1, warmup=0, clock=FakeClock())

    def test_two_best_points(self):
        """Test SweepTable validation."""
        points = (SweepPoint("lane_width", 1, 1.0, True), SweepPoint("lane_width", 2, 1.0, True))
        with pytest.raises(SW_InvalidValueError):
            SweepTable(parameter="lane_width", points=points).validate()


class TestWorkloadTrend:
    """Test check_workload_trend."""

    def test_increasing(self):
        """Test throughput growing with query length."""
        rows = [report_row("a", 100, 1.0), report_row("b", 200, 1.8), report_row("c", 400, 2.5)]
        assert check_workload_trend(rows)

    def test_small_dip_within_slack(self):
        """Test a dip that stays above half the best shorter-query throughput."""
        rows = [report_row("a", 100, 2.0), report_row("b", 200, 1.2)]
        assert check_workload_trend(rows)

    def test_collapse(self):
        """Test a long query far slower than a short one, rows given out of order."""
        rows = [report_row("long", 5000, 0.5), report_row("short", 144, 2.0)]
        assert not check_workload_trend(rows)
        assert check_workload_trend(rows, slack=0.2)


class TestCsv:
    """Test the CSV writers and readers."""

    def test_report_round_trip(self):
        """Test header, float precision and reading back."""
        report = run_benchmark(synthetic_queries([7, 9], seed=6, labels=["P1", "P2"]), TINY_DB, BLOSUM62, GAPS,
            CONFIG, 3, warmup=0, clock=ShrinkingClock())
        sink = io.StringIO()
        emit_csv(report, sink)
        lines = sink.getvalue().splitlines()
        assert lines[0] == ",".join(REPORT_COLUMNS)
        assert lines[0] == "query_id,query_length,repetitions,mean_gcups,min_gcups,max_gcups,stddev_gcups"
        assert len(lines) == 3
        assert lines[1].startswith("P1,7,3,")
        assert read_report_csv(io.StringIO(sink.getvalue())) == list(report.rows)

    def test_sweep_round_trip(self):
        """Test the sweep schema."""
        table = SweepTable(parameter="chunk_width", points=(
            SweepPoint("chunk_width", 32, 1.25, False), SweepPoint("chunk_width", 64, 2.5, True),
        ))
        sink = io.StringIO()
        emit_sweep_csv(table, sink)
        assert sink.getvalue() == "parameter,value,mean_gcups,is_best\nchunk_width,32,1.25,false\nchunk_width,64,2.5,true\n"
        assert read_sweep_csv(io.StringIO(sink.getvalue())) == list(table.points)
        assert read_sweep_csv(sink.getvalue()) == list(table.points)

    def test_empty_report(self):
        """Test a report without rows."""
        sink = io.StringIO()
        emit_csv(BenchReport(rows=(), repetitions=1), sink)
        assert sink.getvalue() == ",".join(REPORT_COLUMNS) + "\n"
        assert read_report_csv(io.StringIO(sink.getvalue())) == []

    @pytest.mark.parametrize("text, line_number", [
        ("", 1),
        ("query,length\n", 1),
        (",".join(REPORT_COLUMNS) + "\nq,1,1,1.0\n", 2),
        (",".join(REPORT_COLUMNS) + "\nq,1,1,1.0,1.0,1.0,0.0\nq,x,1,1.0,1.0,1.0,0.0\n", 3),
    ])
    def test_malformed_report(self, text, line_number):
        """Test wrong headers, short rows and non-numeric cells."""
        with pytest.raises(SW_MalformedInputError) as exc_info:
            read_report_csv(io.StringIO(text))
        assert exc_info.value.line_number == line_number

    def test_malformed_sweep_flag(self):
        """Test an is_best cell that is not true or false."""
        with pytest.raises(SW_MalformedInputError) as exc_info:
            read_sweep_csv(io.StringIO("parameter,value,mean_gcups,is_best\nlane_width,4,1.0,yes\n"))
        assert exc_info.value.line_number == 2


@pytest.mark.swissprot
class TestSwissProtRelease:
    """Test against the Swiss-Prot release named by SWSEARCH_SWISSPROT."""

    def test_release_statistics(self):
        """Test that the 2021_04 release has the recorded size."""
        path = os.environ.get("SWSEARCH_SWISSPROT")
        if not path:
            pytest.skip("SWSEARCH_SWISSPROT is not set")
        db = load_database(path)
        assert (db.num_sequences, db.total_residues, db.max_length) == SWISSPROT_2021_04_STATS


@pytest.mark.performance
class TestThroughput:
    """Machine dependent checks with the real clock."""

    def test_throughput_grows_with_query_length(self):
        """Test that longer queries do not lose throughput on a synthetic database."""
        db = synthetic_database(300, seed=2)
        config = SearchConfig(worker_count=2, cpu_pool_threads=2, with_alignments=False)
        report = sweep_query_lengths([144, 400, 1100], config, db, BLOSUM62, GAPS, repetitions=3)
        assert all(row.mean_gcups > 0 for row in report.rows)
        assert check_workload_trend(report.rows)

    def test_four_workers_speed_up(self):
        """Test that 4 process workers reach 1.8 times the single worker rate on 20000 sequences."""
        if (os.cpu_count() or 1) < 4:
            pytest.skip("needs at least 4 cores")
        db = synthetic_database(20_000, seed=3)
        queries = synthetic_queries([144], seed=4)
        single = SearchConfig(worker_count=1, cpu_pool_threads=0, with_alignments=False)
        four = replace(single, worker_count=4, backend=Backend.PROCESSES)
        baseline = run_benchmark(queries, db, BLOSUM62, GAPS, single, 3, warmup=1)
        parallel = run_benchmark(queries, db, BLOSUM62, GAPS, four, 3, warmup=1)
        assert parallel.rankings == baseline.rankings
        # pool start-up and chunk pickling fall inside the timed search
        assert parallel.mean_gcups >= 1.8 * baseline.mean_gcups

    def test_longest_query_not_slower(self):
        """Test that the 5478 residue query reaches at least the rate of the 144 residue query."""
        if (os.cpu_count() or 1) < 4:
            pytest.skip("needs at least 4 cores")
        db = synthetic_database(20_000, seed=3)
        config = SearchConfig(worker_count=4, cpu_pool_threads=0, with_alignments=False, backend=Backend.PROCESSES)
        report = sweep_query_lengths([144, 5478], config, db, BLOSUM62, GAPS, repetitions=2)
        short, long = report.rows
        assert long.mean_gcups >= short.mean_gcups
