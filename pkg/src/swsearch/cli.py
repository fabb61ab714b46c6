"""
Command-line front end: `swsearch {search,bench,sweep,stats,generate}`.

Results go to stdout (or --output), diagnostics to stderr. Every SW_Error maps to one
exit status, see EXIT_CODES.
"""
from __future__          import annotations
import argparse
import io
import logging
import sys
from typing              import Literal, Sequence

from swsearch.alignment  import DEFAULT_MEMORY_CAP, format_alignment
from swsearch.base       import grepr_dataclass, HasGreprValidate, AbstractTreePath
from swsearch.bench      import (
    DEFAULT_REPETITIONS, DEFAULT_WARMUP, BENCHMARK_QUERY_ACCESSIONS, SWEEPABLE_PARAMETERS,
    emit_csv, emit_sweep_csv, run_benchmark, sweep_parameter,
)
from swsearch.errors     import (
    SW_Error, SW_ValidationError, SW_UsageError, SW_DeterminismViolationError,
    SW_FailedFileReadError, SW_FailedFileWriteError, SW_FileNotFoundError,
    SW_MalformedInputError, SW_MatrixFormatError, SW_EncodingError,
)
from swsearch.file       import write_file_text
from swsearch.kernels    import DEFAULT_CHUNK_WIDTH, DEFAULT_LANE_WIDTH
from swsearch.scheduler  import (
    DEFAULT_CPU_POOL_THREADS, DEFAULT_LENGTH_THRESHOLD, DEFAULT_TOP_K, DEFAULT_WORKER_COUNT,
    Backend, SearchConfig, run_search,
)
from swsearch.scoring    import DEFAULT_GAP_EXTEND, DEFAULT_GAP_OPEN, DEFAULT_MATRIX_NAME, GapModel, ScoringMatrix, load_matrix
from swsearch.seqio      import EncodedSequence, SequenceDatabase, load_database, load_queries, write_fasta
from swsearch.synthetic  import DEFAULT_MAX_LENGTH, DEFAULT_MEAN_LENGTH, benchmark_query_lengths, synthetic_database, synthetic_queries
from swsearch.validation import ValidateAttribute as VA


logger = logging.getLogger(__name__)

PROG = "swsearch"
LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"
DEFAULT_SYNTHETIC_SEQUENCES = 1000

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_FORMAT = 4
EXIT_DETERMINISM = 5
EXIT_CODES = (
    (EXIT_OK, "success"),
    (EXIT_ERROR, "any other error"),
    (EXIT_USAGE, "usage error: unknown flag, missing path or invalid value"),
    (EXIT_IO, "I/O error: file missing, unreadable or unwritable"),
    (EXIT_FORMAT, "format error: malformed FASTA, substitution matrix or residue code"),
    (EXIT_DETERMINISM, "determinism violation: repeated searches ranked differently"),
)

Command = Literal["search", "bench", "sweep", "stats", "generate"]


def format_exit_code_table() -> str:
    return "exit status:\n" + "".join(f"  {code}  {meaning}\n" for code, meaning in EXIT_CODES)

def exit_code_for(error: SW_Error) -> int:
    if isinstance(error, (SW_UsageError, SW_ValidationError)):
        return EXIT_USAGE
    if isinstance(error, (SW_FileNotFoundError, SW_FailedFileReadError, SW_FailedFileWriteError)):
        return EXIT_IO
    if isinstance(error, (SW_MalformedInputError, SW_MatrixFormatError, SW_EncodingError)):
        return EXIT_FORMAT
    if isinstance(error, SW_DeterminismViolationError):
        return EXIT_DETERMINISM
    return EXIT_ERROR


@grepr_dataclass(frozen=True, order=False)
class CliInvocation(HasGreprValidate):
    """A parsed command line. Fields a command does not use keep their defaults."""
    command: Command
    query_path: str | None = None
    db_path: str | None = None
    matrix: str = DEFAULT_MATRIX_NAME
    gap_open: int = DEFAULT_GAP_OPEN
    gap_extend: int = DEFAULT_GAP_EXTEND
    worker_count: int = DEFAULT_WORKER_COUNT
    cpu_pool_threads: int = DEFAULT_CPU_POOL_THREADS
    lane_width: int = DEFAULT_LANE_WIDTH
    chunk_width: int = DEFAULT_CHUNK_WIDTH
    length_threshold: int = DEFAULT_LENGTH_THRESHOLD
    top_k: int = DEFAULT_TOP_K
    memory_cap: int = DEFAULT_MEMORY_CAP
    with_alignments: bool = True
    backend: Literal["threads", "processes"] = Backend.PROCESSES.value
    repetitions: int = DEFAULT_REPETITIONS
    warmup: int = DEFAULT_WARMUP
    parameter: str | None = None
    values: tuple[int, ...] = ()
    num_sequences: int = DEFAULT_SYNTHETIC_SEQUENCES
    seed: int = 0
    mean_length: int = DEFAULT_MEAN_LENGTH
    max_length: int = DEFAULT_MAX_LENGTH
    query_set: bool = False
    output: str | None = None
    verbosity: int = 0

    def post_validate(self, path: AbstractTreePath) -> None:
        if self.command in ("search", "bench", "sweep"):
            VA.VA_TYPE(self, path, "query_path", str, condition=f"{self.command} needs --query")
        if self.command in ("search", "bench", "sweep", "stats"):
            VA.VA_TYPE(self, path, "db_path", str, condition=f"{self.command} needs --db")
        if self.command == "sweep":
            VA.VA_ONE_OF(self, path, "parameter", SWEEPABLE_PARAMETERS)
            VA.VA_MIN_LEN(self, path, "values", 1)
        VA.VA_MIN(self, path, "repetitions", 1)
        VA.VA_MIN(self, path, "warmup", 0)
        VA.VA_MIN(self, path, "num_sequences", 0)
        VA.VA_MIN(self, path, "mean_length", 1)
        VA.VA_MIN(self, path, "max_length", 1)

    def search_config(self) -> SearchConfig:
        config = SearchConfig(
            worker_count=self.worker_count,
            lane_width=self.lane_width,
            chunk_width=self.chunk_width,
            length_threshold=self.length_threshold,
            top_k=self.top_k,
            cpu_pool_threads=self.cpu_pool_threads,
            memory_cap=self.memory_cap,
            with_alignments=self.with_alignments,
            backend=Backend(self.backend),
        )
        config.validate()
        return config

    def gap_model(self) -> GapModel:
        gaps = GapModel(open_penalty=self.gap_open, extend_penalty=self.gap_extend)
        gaps.validate()
        return gaps


class CliArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that raises SW_UsageError instead of exiting on bad arguments."""

    def error(self, message: str) -> None:
        raise SW_UsageError(f"{self.prog}: {message}")

def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(item) for item in text.split(",") if item.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None

def build_parser() -> CliArgumentParser:
    common = CliArgumentParser(add_help=False)
    common.add_argument("-o", "--output", metavar="FILE", help="write results to FILE instead of stdout")
    common.add_argument("-v", "--verbose", action="count", default=0, help="more diagnostics on stderr (-vv for debug)")
    common.add_argument("--quiet", action="store_true", help="only report errors on stderr")

    inputs = CliArgumentParser(add_help=False)
    inputs.add_argument("-q", "--query", dest="query_path", metavar="FASTA", required=True, help="query sequences, searched one after another")
    inputs.add_argument("-d", "--db", dest="db_path", metavar="FASTA", required=True, help="database sequences")

    search = CliArgumentParser(add_help=False)
    search.add_argument("-m", "--matrix", default=DEFAULT_MATRIX_NAME, help=f"built-in matrix name or NCBI matrix file (default {DEFAULT_MATRIX_NAME})")
    search.add_argument("--gap-open", type=int, default=DEFAULT_GAP_OPEN, help=f"gap open penalty (default {DEFAULT_GAP_OPEN})")
    search.add_argument("--gap-extend", type=int, default=DEFAULT_GAP_EXTEND, help=f"gap extension penalty (default {DEFAULT_GAP_EXTEND})")
    search.add_argument("-w", "--workers", dest="worker_count", type=int, default=DEFAULT_WORKER_COUNT, help=f"intra-task workers (default {DEFAULT_WORKER_COUNT})")
    search.add_argument("-T", "--cpu-threads", dest="cpu_pool_threads", type=int, default=DEFAULT_CPU_POOL_THREADS, help=f"dedicated inter-task workers, 0 for none (default {DEFAULT_CPU_POOL_THREADS})")
    search.add_argument("--lane-width", type=int, default=DEFAULT_LANE_WIDTH, help=f"subjects per lane batch (default {DEFAULT_LANE_WIDTH})")
    search.add_argument("--chunk-width", type=int, default=DEFAULT_CHUNK_WIDTH, help=f"query positions per wavefront stripe (default {DEFAULT_CHUNK_WIDTH})")
    search.add_argument("--length-threshold", type=int, default=DEFAULT_LENGTH_THRESHOLD, help=f"subjects at least this long use the wavefront kernel (default {DEFAULT_LENGTH_THRESHOLD})")
    search.add_argument("-k", "--top-k", type=int, default=DEFAULT_TOP_K, help=f"hits to report per query (default {DEFAULT_TOP_K})")
    search.add_argument("--memory-cap", type=int, default=DEFAULT_MEMORY_CAP, help="byte budget of one traceback matrix")
    search.add_argument("--backend", choices=[backend.value for backend in Backend], default=Backend.PROCESSES.value, help=f"where chunks are scored (default {Backend.PROCESSES.value})")

    timing = CliArgumentParser(add_help=False)
    timing.add_argument("--repetitions", type=int, default=DEFAULT_REPETITIONS, help=f"timed searches per query (default {DEFAULT_REPETITIONS})")
    timing.add_argument("--warmup", type=int, default=DEFAULT_WARMUP, help=f"discarded searches per query (default {DEFAULT_WARMUP})")

    parser = CliArgumentParser(
        prog=PROG,
        description="Smith-Waterman protein database search.",
        epilog=format_exit_code_table(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND", parser_class=CliArgumentParser)

    search_parser = commands.add_parser("search", parents=[inputs, search, common], help="rank database sequences for each query")
    search_parser.add_argument("--no-alignments", dest="with_alignments", action="store_false", help="report scores only")

    commands.add_parser("bench", parents=[inputs, search, timing, common], help="measure GCUPS per query as CSV")

    sweep_parser = commands.add_parser("sweep", parents=[inputs, search, timing, common], help="benchmark over lane or chunk widths as CSV")
    sweep_parser.add_argument("--parameter", required=True, choices=SWEEPABLE_PARAMETERS, help="width to vary")
    sweep_parser.add_argument("--values", required=True, type=_int_list, metavar="N,N,...", help="values of the width")

    stats_parser = commands.add_parser("stats", parents=[common], help="print database statistics")
    stats_parser.add_argument("-d", "--db", dest="db_path", metavar="FASTA", required=True, help="database sequences")

    generate_parser = commands.add_parser("generate", parents=[common], help="write a synthetic FASTA database")
    generate_parser.add_argument("-n", "--num-sequences", type=int, default=DEFAULT_SYNTHETIC_SEQUENCES, help=f"sequences to generate (default {DEFAULT_SYNTHETIC_SEQUENCES})")
    generate_parser.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    generate_parser.add_argument("--mean-length", type=int, default=DEFAULT_MEAN_LENGTH, help=f"mean sequence length (default {DEFAULT_MEAN_LENGTH})")
    generate_parser.add_argument("--max-length", type=int, default=DEFAULT_MAX_LENGTH, help=f"longest sequence (default {DEFAULT_MAX_LENGTH})")
    generate_parser.add_argument("--query-set", action="store_true", help="write 20 queries of 144..5478 residues instead")
    return parser


def parse_args(argv: Sequence[str]) -> CliInvocation:
    """
    Raises:
        SW_UsageError: for unknown flags, missing required paths or non-numeric values
    """
    namespace = vars(build_parser().parse_args(list(argv)))
    quiet, verbose = namespace.pop("quiet"), namespace.pop("verbose")
    verbosity = -1 if quiet else verbose
    fields = CliInvocation.__dataclass_fields__
    invocation = CliInvocation(verbosity=verbosity, **{name: value for name, value in namespace.items() if name in fields})
    try:
        invocation.validate()
    except SW_ValidationError as error:
        raise SW_UsageError(f"{PROG} {invocation.command}: {error}") from error
    return invocation

def configure_logging(verbosity: int) -> None:
    """One stderr handler on the package logger: -1 errors only, 0 warnings, 1 info, 2+ debug."""
    level = {-1: logging.ERROR, 0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    package_logger = logging.getLogger(PROG)
    for handler in [handler for handler in package_logger.handlers if getattr(handler, "_swsearch_cli", False)]:
        package_logger.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler._swsearch_cli = True
    package_logger.addHandler(handler)
    package_logger.setLevel(level)


def _emit(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        write_file_text(output, text)

def _format_hits(query: EncodedSequence, db: SequenceDatabase, matrix: ScoringMatrix,
        gaps: GapModel, config: SearchConfig) -> str:
    results = run_search(query, db, matrix, gaps, config)
    lines = [f"Query: {query.source_header} ({query.length} residues)", f"{len(results)} hit{'' if len(results) == 1 else 's'}"]
    if results.hits:
        lines.append(f"{'rank':>4}  {'score':>6}  {'index':>8}  header")
    for rank, hit in enumerate(results.hits, start=1):
        lines.append(f"{rank:>4}  {hit.score:>6}  {hit.db_index:>8}  {db.headers[hit.db_index]}")
        alignment = hit.alignment
        if alignment is None:
            continue
        if not alignment.capped and alignment.length:
            lines.append(f"      Identities {alignment.identities}/{alignment.length}, "
                f"Positives {alignment.positives}/{alignment.length}, Gaps {alignment.gaps}/{alignment.length}")
        lines.append(format_alignment(alignment, query, db[hit.db_index], matrix).rstrip("\n"))
        lines.append("")
    return "\n".join(lines) + "\n"

def main(invocation: CliInvocation) -> int:
    """
    Execute a parsed invocation and return its exit status. Settings are validated
    before any input file is opened.

    Raises:
        SW_Error: subclasses as listed in EXIT_CODES
    """
    command = invocation.command
    if command == "generate":
        if invocation.query_set:
            sequences = synthetic_queries(benchmark_query_lengths(len(BENCHMARK_QUERY_ACCESSIONS)), invocation.seed, BENCHMARK_QUERY_ACCESSIONS)
        else:
            sequences = synthetic_database(invocation.num_sequences, invocation.seed, invocation.mean_length, invocation.max_length).sequences
        sink = io.StringIO()
        write_fasta(sequences, sink)
        _emit(sink.getvalue(), invocation.output)
        return EXIT_OK

    if command == "stats":
        _emit(load_database(invocation.db_path).describe() + "\n", invocation.output)
        return EXIT_OK

    config = invocation.search_config()
    gaps = invocation.gap_model()
    matrix = load_matrix(invocation.matrix)
    db = load_database(invocation.db_path)
    queries = load_queries(invocation.query_path)

    sink = io.StringIO()
    if command == "search":
        sink.write("\n".join(_format_hits(query, db, matrix, gaps, config) for query in queries))
    elif command == "bench":
        emit_csv(run_benchmark(queries, db, matrix, gaps, config, invocation.repetitions, warmup=invocation.warmup), sink)
    else:
        table = sweep_parameter(invocation.parameter, invocation.values, config, queries, db, matrix, gaps,
            invocation.repetitions, warmup=invocation.warmup)
        emit_sweep_csv(table, sink)
        logger.info("best %s: %d", table.parameter, table.best.value)
    _emit(sink.getvalue(), invocation.output)
    return EXIT_OK

def run(argv: Sequence[str] | None = None) -> int:
    """Parse, execute and translate errors to exit statuses; diagnostics go to stderr."""
    argv = sys.argv[1:] if argv is None else argv
    try:
        invocation = parse_args(argv)
        configure_logging(invocation.verbosity)
        return main(invocation)
    except SystemExit as exit:
        # --help and --version
        return exit.code if isinstance(exit.code, int) else EXIT_OK
    except SW_Error as error:
        print(f"{PROG}: error: {error}", file=sys.stderr)
        return exit_code_for(error)

def cli_entry() -> None:
    sys.exit(run())


__all__ = [
    "EXIT_OK", "EXIT_ERROR", "EXIT_USAGE", "EXIT_IO", "EXIT_FORMAT", "EXIT_DETERMINISM", "EXIT_CODES",
    "CliInvocation", "CliArgumentParser", "build_parser", "parse_args", "main", "run", "cli_entry",
    "configure_logging", "format_exit_code_table", "exit_code_for",
]
