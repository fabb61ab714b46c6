"""Seeded synthetic sequences for tests, benchmarks and the checked-in sample database."""
from __future__  import annotations
import math
from typing      import Sequence

import numpy as np

from swsearch.decorators import enforce_argument_types
from swsearch.seqio      import EncodedSequence, SequenceDatabase


STANDARD_RESIDUE_COUNT = 20 # A..V of the protein alphabet, no ambiguity codes
DEFAULT_MEAN_LENGTH = 360
DEFAULT_MAX_LENGTH = 5000
LENGTH_SIGMA = 0.7
QUERY_LENGTH_RANGE = (144, 5478)


@enforce_argument_types
def random_sequence(rng: np.random.Generator, length: int, alphabet_size: int = STANDARD_RESIDUE_COUNT,
        header: str = "random") -> EncodedSequence:
    """Uniformly random residue codes in [0, alphabet_size)."""
    codes = rng.integers(0, alphabet_size, size=length, dtype=np.uint8).tobytes()
    return EncodedSequence(codes=codes, length=length, source_header=header)

@enforce_argument_types
def synthetic_database(num_sequences: int, seed: int = 0, mean_length: int = DEFAULT_MEAN_LENGTH,
        max_length: int = DEFAULT_MAX_LENGTH, alphabet_size: int = STANDARD_RESIDUE_COUNT) -> SequenceDatabase:
    """
    A database with log-normal lengths around `mean_length` (protein databases have a
    long right tail), clipped to [1, max_length]. Equal arguments give equal databases.
    """
    rng = np.random.default_rng(seed)
    mu = math.log(mean_length) - LENGTH_SIGMA ** 2 / 2
    lengths = np.clip(np.rint(rng.lognormal(mu, LENGTH_SIGMA, size=num_sequences)), 1, max_length).astype(np.int64)
    return SequenceDatabase.from_sequences(
        random_sequence(rng, int(length), alphabet_size, header=f"synthetic_{index:06d} length={int(length)}")
        for index, length in enumerate(lengths)
    )

@enforce_argument_types
def synthetic_queries(lengths: Sequence[int], seed: int = 1, labels: Sequence[str] | None = None) -> list[EncodedSequence]:
    """One random query per length, labelled `labels[n]` or query_NN."""
    if labels is not None and len(labels) < len(lengths):
        raise ValueError(f"{len(labels)} label(s) for {len(lengths)} queries")
    rng = np.random.default_rng(seed)
    return [
        random_sequence(rng, length, header=f"{labels[n] if labels is not None else f'query_{n:02d}'} length={length}")
        for n, length in enumerate(lengths)
    ]

@enforce_argument_types
def benchmark_query_lengths(count: int = 20) -> list[int]:
    """`count` lengths spaced geometrically over the 144..5478 residue query range."""
    if count < 1:
        raise ValueError(f"count must be at least 1 not {count}")
    low, high = QUERY_LENGTH_RANGE
    if count == 1:
        return [low]
    return [int(round(length)) for length in np.geomspace(low, high, count)]


__all__ = ["random_sequence", "synthetic_database", "synthetic_queries", "benchmark_query_lengths"]
