"""Data set construction: seeded sampling of word types, 3:2 random
splits, and unseen-word test sets drawn from the leftover pool.

Sampling is uniform over types (the corpus carries no frequency
information). All draws go through per-object generators derived from the
caller's seed via :mod:`segbench.seeds`, so any data set or split can be
rebuilt in isolation without replaying the whole experiment.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Sequence

from .corpus import Corpus, Word
from .seeds import rng_for
from .splits import Split, SplitMethod, train_size


class SamplingStrategy(str, Enum):
    WITH_REPLACEMENT = "with_replacement"
    WITHOUT_REPLACEMENT = "without_replacement"


class InfeasibleSizeError(ValueError):
    """Requested sample size exceeds what the source can provide."""


@dataclass(frozen=True)
class ExperimentalSetting:
    """One cell of the experimental grid: language x size x strategy."""

    language_tag: str
    dataset_size: int
    strategy: SamplingStrategy

    def __post_init__(self) -> None:
        if self.dataset_size < 1:
            raise ValueError(f"dataset_size must be >= 1, got {self.dataset_size}")

    @property
    def id(self) -> str:
        return f"{self.language_tag}-{self.dataset_size}-{self.strategy.value}"


@dataclass(frozen=True)
class DataSet:
    """A sampled multiset of word tokens, id 0 being the first data set."""

    id: int
    tokens: tuple[Word, ...]

    def __post_init__(self) -> None:
        if self.id < 0:
            raise ValueError(f"dataset id must be >= 0, got {self.id}")

    def __len__(self) -> int:
        return len(self.tokens)

    def surfaces(self) -> frozenset[str]:
        return frozenset(w.surface for w in self.tokens)


def sample_datasets(
    corpus: Corpus,
    size: int,
    strategy: SamplingStrategy,
    count: int,
    seed: int,
) -> list[DataSet]:
    """Draw `count` data sets of `size` tokens each from the corpus types.

    Each data set uses its own generator keyed by (seed, id), so data set
    17 is reproducible without drawing the first 17.
    """
    if size < 1:
        raise ValueError(f"size must be >= 1, got {size}")
    n_types = len(corpus.words)
    if strategy is SamplingStrategy.WITHOUT_REPLACEMENT and size > n_types:
        raise InfeasibleSizeError(
            f"cannot draw {size} distinct types from a corpus of {n_types}"
        )
    replace = strategy is SamplingStrategy.WITH_REPLACEMENT
    out = []
    for ds_id in range(count):
        rng = rng_for(seed, ds_id)
        idx = rng.choice(n_types, size=size, replace=replace)
        out.append(DataSet(id=ds_id, tokens=tuple(corpus.words[i] for i in idx)))
    return out


def make_random_splits(
    dataset: DataSet,
    train_fraction: Fraction | float = Fraction(3, 5),
    n_splits: int = 5,
    seed: int = 0,
) -> list[Split]:
    """Partition the token multiset into train/test `n_splits` times.

    Train side gets floor(train_fraction * N) tokens, remainder to test.
    With replacement a duplicated surface may land on both sides; that is
    intentional, tokens are what gets partitioned.
    """
    n = len(dataset.tokens)
    if n == 0:
        raise ValueError("cannot split an empty data set")
    n_train = train_size(n, train_fraction)
    out = []
    for r in range(n_splits):
        rng = rng_for(seed, dataset.id, r)
        perm = rng.permutation(n)
        train_idx = sorted(perm[:n_train])
        test_idx = sorted(perm[n_train:])
        out.append(
            Split(
                train=tuple(dataset.tokens[i] for i in train_idx),
                test=tuple(dataset.tokens[i] for i in test_idx),
                method=SplitMethod.RANDOM,
                replicate=r,
            )
        )
    return out


def build_newtest_pool(corpus: Corpus, dataset: DataSet) -> tuple[Word, ...]:
    """Corpus words whose surface never occurs in the data set.

    Returned in corpus order (a set would poison downstream determinism).
    """
    seen = dataset.surfaces()
    return tuple(w for w in corpus.words if w.surface not in seen)


def sample_new_testsets(
    pool: Sequence[Word],
    size: int,
    count: int = 100,
    seed: int = 0,
) -> list[tuple[Word, ...]]:
    """Draw `count` unseen test sets of `size` distinct words from the pool."""
    if size > len(pool):
        raise InfeasibleSizeError(
            f"cannot draw {size} distinct words from a pool of {len(pool)}"
        )
    out = []
    for set_no in range(count):
        rng = rng_for(seed, set_no)
        idx = rng.choice(len(pool), size=size, replace=False)
        out.append(tuple(pool[i] for i in sorted(idx)))
    return out
