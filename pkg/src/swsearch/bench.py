"""
Throughput measurement: GCUPS per query averaged over repeated timed searches, and
sensitivity sweeps over the lane and chunk widths.

CSV schemas (column order is fixed):

    report: query_id,query_length,repetitions,mean_gcups,min_gcups,max_gcups,stddev_gcups
    sweep:  parameter,value,mean_gcups,is_best
"""
from __future__          import annotations
import csv
import io
import logging
import math
import statistics
import time
from dataclasses         import replace
from typing              import Callable, Iterable, Sequence, TextIO

from swsearch.base       import grepr_dataclass, field, AbstractTreePath, HasGreprValidate
from swsearch.decorators import enforce_argument_types
from swsearch.errors     import (
    SW_MeasurementError, SW_DeterminismViolationError, SW_InvalidValueError, SW_MalformedInputError,
)
from swsearch.scheduler  import RankedResults, SearchConfig, run_search
from swsearch.scoring    import GapModel, ScoringMatrix
from swsearch.seqio      import EncodedSequence, SequenceDatabase
from swsearch.synthetic  import QUERY_LENGTH_RANGE, synthetic_queries
from swsearch.validation import ValidateAttribute as VA


logger = logging.getLogger(__name__)

DEFAULT_REPETITIONS = 20
DEFAULT_WARMUP = 1
DEFAULT_TREND_SLACK = 0.5
CELLS_PER_GIGACELL = 10 ** 9

BENCHMARK_QUERY_ACCESSIONS = (
    "P02232", "P05013", "P14942", "P07327", "P01008", "P03435", "P42357", "P21177", "Q38941", "P27895",
    "P07756", "P04775", "P19096", "P28167", "P0C6B8", "P20930", "P08519", "Q7TMA5", "P33450", "Q9UKN1",
)
BENCHMARK_QUERY_LENGTH_RANGE = QUERY_LENGTH_RANGE
SWISSPROT_2021_04_STATS = (565928, 204173280, 35213)

REPORT_COLUMNS = ("query_id", "query_length", "repetitions", "mean_gcups", "min_gcups", "max_gcups", "stddev_gcups")
SWEEP_COLUMNS = ("parameter", "value", "mean_gcups", "is_best")
SWEEPABLE_PARAMETERS = ("lane_width", "chunk_width")


@grepr_dataclass(frozen=True)
class GcupsMeasure(HasGreprValidate):
    """One timed search: gcups = query_length * db_residues / (elapsed * 1e9)."""
    query_length: int
    db_residues: int
    elapsed: float
    gcups: float

    def post_validate(self, path: AbstractTreePath) -> None:
        if not self.elapsed > 0:
            raise SW_MeasurementError(f"elapsed time must be positive not {self.elapsed}")
        expected = self.query_length * self.db_residues / (self.elapsed * CELLS_PER_GIGACELL)
        if not math.isclose(self.gcups, expected, rel_tol=1e-9, abs_tol=0.0):
            raise SW_InvalidValueError(path.add_attribute("gcups"), f"{self.gcups} does not match the cell count, expected {expected}")

@grepr_dataclass(frozen=True, order=False)
class QueryReportRow(HasGreprValidate):
    query_id: str
    query_length: int
    repetitions: int
    mean_gcups: float
    min_gcups: float
    max_gcups: float
    stddev_gcups: float
    measures: tuple[GcupsMeasure, ...] = field(default=(), compare=False, grepr=False)

    def post_validate(self, path: AbstractTreePath) -> None:
        VA.VA_MIN(self, path, "repetitions", 1)
        VA.VA_MIN(self, path, "stddev_gcups", 0.0)
        VA.VA_RANGE(self, path, "mean_gcups", self.min_gcups, self.max_gcups)

    @classmethod
    def from_measures(cls, query_id: str, measures: Sequence[GcupsMeasure]) -> QueryReportRow:
        values = [measure.gcups for measure in measures]
        # the mean of equal floats can round one ulp away from them
        mean = min(max(statistics.fmean(values), min(values)), max(values))
        row = cls(
            query_id=query_id,
            query_length=measures[0].query_length,
            repetitions=len(measures),
            mean_gcups=mean,
            min_gcups=min(values),
            max_gcups=max(values),
            stddev_gcups=statistics.stdev(values) if len(values) > 1 else 0.0,
            measures=tuple(measures),
        )
        row.validate()
        return row

@grepr_dataclass(frozen=True)
class BenchEnvironment(HasGreprValidate):
    """Search settings and database statistics a report was measured with."""
    worker_count: int
    cpu_pool_threads: int
    lane_width: int
    chunk_width: int
    length_threshold: int
    backend: str
    num_sequences: int
    db_residues: int
    max_length: int

    @classmethod
    def describe(cls, config: SearchConfig, db: SequenceDatabase) -> BenchEnvironment:
        return cls(
            worker_count=config.worker_count,
            cpu_pool_threads=config.cpu_pool_threads,
            lane_width=config.lane_width,
            chunk_width=config.chunk_width,
            length_threshold=config.length_threshold,
            backend=config.backend.value,
            num_sequences=db.num_sequences,
            db_residues=db.total_residues,
            max_length=db.max_length,
        )

@grepr_dataclass(frozen=True, order=False)
class BenchReport(HasGreprValidate):
    """
    Per-query rows in query order. `rankings` holds the reference ranking of every
    query (the first measured repetition).
    """
    rows: tuple[QueryReportRow, ...]
    repetitions: int
    environment: BenchEnvironment | None = None
    rankings: tuple[RankedResults, ...] = field(default=(), compare=False, grepr=False)

    def post_validate(self, path: AbstractTreePath) -> None:
        VA.VA_MIN(self, path, "repetitions", 1)
        for i, row in enumerate(self.rows):
            VA.VA_EQUAL(row, path.add_attribute("rows").add_index_or_key(i), "repetitions", self.repetitions)

    @property
    def mean_gcups(self) -> float:
        return statistics.fmean(row.mean_gcups for row in self.rows) if self.rows else 0.0

@grepr_dataclass(frozen=True)
class SweepPoint(HasGreprValidate):
    parameter: str
    value: int
    mean_gcups: float
    is_best: bool = False

@grepr_dataclass(frozen=True, order=False)
class SweepTable(HasGreprValidate):
    """One point per swept value, in the given order; exactly one point is flagged best."""
    parameter: str
    points: tuple[SweepPoint, ...]
    reports: tuple[BenchReport, ...] = field(default=(), compare=False, grepr=False)

    def post_validate(self, path: AbstractTreePath) -> None:
        VA.VA_ONE_OF(self, path, "parameter", SWEEPABLE_PARAMETERS)
        VA.VA_MIN_LEN(self, path, "points", 1)
        if sum(point.is_best for point in self.points) != 1:
            raise SW_InvalidValueError(path.add_attribute("points"), "exactly one point must be flagged best")

    @property
    def best(self) -> SweepPoint:
        return next(point for point in self.points if point.is_best)


def _query_id(query: EncodedSequence, position: int) -> str:
    words = query.source_header.split()
    return words[0] if words else f"query_{position:02d}"

@enforce_argument_types
def measure_gcups(query_length: int, db_residues: int, elapsed: int | float) -> GcupsMeasure:
    """
    Raises:
        SW_MeasurementError: if elapsed <= 0
    """
    if elapsed <= 0:
        raise SW_MeasurementError(f"elapsed time must be positive not {elapsed}")
    elapsed = float(elapsed)
    gcups = query_length * db_residues / (elapsed * CELLS_PER_GIGACELL)
    return GcupsMeasure(query_length=query_length, db_residues=db_residues, elapsed=elapsed, gcups=gcups)

@enforce_argument_types
def run_benchmark(queries: Sequence[EncodedSequence], db: SequenceDatabase, matrix: ScoringMatrix, gaps: GapModel,
        config: SearchConfig, repetitions: int = DEFAULT_REPETITIONS, *, warmup: int = DEFAULT_WARMUP,
        clock: Callable[[], float] = time.perf_counter) -> BenchReport:
    """
    Time `repetitions` searches per query, after `warmup` discarded runs. Only run_search
    is timed, with alignments disabled. Every repetition must reproduce the ranking of
    the first one.

    Raises:
        SW_DeterminismViolationError: if a repetition ranks differently
        SW_MeasurementError: if the clock does not advance across a search
    """
    if repetitions < 1 or warmup < 0:
        raise SW_InvalidValueError(AbstractTreePath(), f"need repetitions >= 1 and warmup >= 0, got {repetitions} and {warmup}")
    timed_config = replace(config, with_alignments=False)
    timed_config.validate()

    rows, rankings = [], []
    for position, query in enumerate(queries):
        query_id = _query_id(query, position)
        for _ in range(warmup):
            run_search(query, db, matrix, gaps, timed_config)

        reference: RankedResults | None = None
        measures = []
        for repetition in range(1, repetitions + 1):
            start = clock()
            results = run_search(query, db, matrix, gaps, timed_config)
            elapsed = clock() - start
            if reference is None:
                reference = results
            elif results != reference:
                raise SW_DeterminismViolationError(query_id, f"repetition {repetition} ranks differently from repetition 1")
            measures.append(measure_gcups(query.length, db.total_residues, elapsed))
            logger.debug("%s repetition %d: %.6f s, %.4f GCUPS", query_id, repetition, elapsed, measures[-1].gcups)

        row = QueryReportRow.from_measures(query_id, measures)
        logger.info("%s (%d residues): mean %.4f GCUPS over %d repetitions", query_id, query.length, row.mean_gcups, repetitions)
        rows.append(row)
        rankings.append(reference)

    report = BenchReport(
        rows=tuple(rows),
        repetitions=repetitions,
        environment=BenchEnvironment.describe(timed_config, db),
        rankings=tuple(rankings),
    )
    report.validate()
    return report

@enforce_argument_types
def sweep_parameter(parameter: str, values: Sequence[int], config: SearchConfig, queries: Sequence[EncodedSequence],
        db: SequenceDatabase, matrix: ScoringMatrix, gaps: GapModel, repetitions: int = DEFAULT_REPETITIONS, *,
        warmup: int = DEFAULT_WARMUP, clock: Callable[[], float] = time.perf_counter) -> SweepTable:
    """
    Benchmark once per value of `parameter` ("lane_width" or "chunk_width") with
    everything else fixed. The first value with the highest mean GCUPS is flagged best.

    Raises:
        SW_DeterminismViolationError: if any value changes a ranking
    """
    path = AbstractTreePath()
    if parameter not in SWEEPABLE_PARAMETERS:
        raise SW_InvalidValueError(path.add_attribute("parameter"), f"must be one of {SWEEPABLE_PARAMETERS!r} not {parameter!r}")
    if not values:
        raise SW_InvalidValueError(path.add_attribute("values"), "at least one value is needed")

    reports = []
    for value in values:
        point_config = replace(config, **{parameter: value})
        point_config.validate()
        report = run_benchmark(queries, db, matrix, gaps, point_config, repetitions, warmup=warmup, clock=clock)
        if reports:
            for position, (ranking, reference) in enumerate(zip(report.rankings, reports[0].rankings)):
                if ranking != reference:
                    raise SW_DeterminismViolationError(
                        _query_id(queries[position], position), f"{parameter}={value} ranks differently from {parameter}={values[0]}")
        logger.info("%s=%d: mean %.4f GCUPS", parameter, value, report.mean_gcups)
        reports.append(report)

    means = [report.mean_gcups for report in reports]
    best_index = means.index(max(means))
    table = SweepTable(
        parameter=parameter,
        points=tuple(
            SweepPoint(parameter=parameter, value=value, mean_gcups=mean, is_best=(i == best_index))
            for i, (value, mean) in enumerate(zip(values, means))
        ),
        reports=tuple(reports),
    )
    table.validate()
    return table

@enforce_argument_types
def sweep_query_lengths(lengths: Sequence[int], config: SearchConfig, db: SequenceDatabase, matrix: ScoringMatrix,
        gaps: GapModel, seed: int = 1, repetitions: int = DEFAULT_REPETITIONS, *, warmup: int = DEFAULT_WARMUP,
        clock: Callable[[], float] = time.perf_counter) -> BenchReport:
    """Throughput as a function of query length: one synthetic query per length."""
    labels = BENCHMARK_QUERY_ACCESSIONS if len(lengths) <= len(BENCHMARK_QUERY_ACCESSIONS) else None
    queries = synthetic_queries(lengths, seed, labels)
    return run_benchmark(queries, db, matrix, gaps, config, repetitions, warmup=warmup, clock=clock)

@enforce_argument_types
def check_workload_trend(rows: Sequence[QueryReportRow], slack: float = DEFAULT_TREND_SLACK) -> bool:
    """
    Whether throughput grows with query length: ordered by length, every row must reach
    `slack` times the best mean seen for shorter queries.
    """
    best_so_far = 0.0
    holds = True
    for row in sorted(rows, key=lambda row: (row.query_length, row.query_id)):
        if row.mean_gcups < slack * best_so_far:
            logger.info("workload trend broken at %s (%d residues): %.4f < %.2f x %.4f GCUPS",
                row.query_id, row.query_length, row.mean_gcups, slack, best_so_far)
            holds = False
        best_so_far = max(best_so_far, row.mean_gcups)
    return holds


@enforce_argument_types
def emit_csv(report: BenchReport, sink: TextIO | io.TextIOBase) -> None:
    """Write the report schema: header row, then one row per query."""
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for row in report.rows:
        writer.writerow((row.query_id, row.query_length, row.repetitions,
            repr(row.mean_gcups), repr(row.min_gcups), repr(row.max_gcups), repr(row.stddev_gcups)))

@enforce_argument_types
def emit_sweep_csv(table: SweepTable, sink: TextIO | io.TextIOBase) -> None:
    """Write the sweep schema: header row, then one row per swept value."""
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for point in table.points:
        writer.writerow((point.parameter, point.value, repr(point.mean_gcups), "true" if point.is_best else "false"))

def _read_rows(stream: Iterable[str], columns: tuple[str, ...]) -> Iterable[tuple[int, list[str]]]:
    reader = csv.reader(io.StringIO(stream) if isinstance(stream, str) else stream)
    header = next(reader, None)
    if header is None or tuple(header) != columns:
        raise SW_MalformedInputError(f"expected header {','.join(columns)}", 1)
    for cells in reader:
        if not cells:
            continue
        if len(cells) != len(columns):
            raise SW_MalformedInputError(f"expected {len(columns)} cells not {len(cells)}", reader.line_num)
        yield reader.line_num, cells

@enforce_argument_types
def read_report_csv(stream: Iterable[str]) -> list[QueryReportRow]:
    """
    Parse the report schema back into rows (measures are not stored in the CSV).

    Raises:
        SW_MalformedInputError: for a wrong header, row width or numeric cell
    """
    rows = []
    for line_number, cells in _read_rows(stream, REPORT_COLUMNS):
        try:
            row = QueryReportRow(
                query_id=cells[0], query_length=int(cells[1]), repetitions=int(cells[2]),
                mean_gcups=float(cells[3]), min_gcups=float(cells[4]), max_gcups=float(cells[5]), stddev_gcups=float(cells[6]),
            )
        except ValueError as error:
            raise SW_MalformedInputError(f"bad numeric cell: {error}", line_number) from error
        rows.append(row)
    return rows

@enforce_argument_types
def read_sweep_csv(stream: Iterable[str]) -> list[SweepPoint]:
    """
    Raises:
        SW_MalformedInputError: for a wrong header, row width, numeric or boolean cell
    """
    points = []
    for line_number, (parameter, value, mean, is_best) in _read_rows(stream, SWEEP_COLUMNS):
        if is_best not in ("true", "false"):
            raise SW_MalformedInputError(f"is_best must be true or false not {is_best!r}", line_number)
        try:
            points.append(SweepPoint(parameter=parameter, value=int(value), mean_gcups=float(mean), is_best=is_best == "true"))
        except ValueError as error:
            raise SW_MalformedInputError(f"bad numeric cell: {error}", line_number) from error
    return points


__all__ = [
    "DEFAULT_REPETITIONS", "DEFAULT_WARMUP", "BENCHMARK_QUERY_ACCESSIONS", "BENCHMARK_QUERY_LENGTH_RANGE",
    "SWISSPROT_2021_04_STATS", "REPORT_COLUMNS", "SWEEP_COLUMNS", "SWEEPABLE_PARAMETERS",
    "GcupsMeasure", "QueryReportRow", "BenchEnvironment", "BenchReport", "SweepPoint", "SweepTable",
    "measure_gcups", "run_benchmark", "sweep_parameter", "sweep_query_lengths", "check_workload_trend",
    "emit_csv", "emit_sweep_csv", "read_report_csv", "read_sweep_csv",
]
