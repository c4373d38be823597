"""Train/test partitions: the shared Split type plus heuristic and
adversarial alternatives to random splitting.

The heuristic splitter thresholds on morphs per word; it reports
NOT_APPLICABLE (returns None) when no integer threshold lands close enough
to the requested test fraction, which is the common case on realistic data.

The adversarial splitter maximizes the Wasserstein-1 distance between the
morphs-per-word distributions of the two halves. Sorting tokens by that
statistic and cutting at one end maximizes the distance over contiguous
equal-size cuts, so the splitter tries both ends and keeps the better one.
Replicates differ only through seeded shuffling of tied statistics (and
seeded end choice on exact ties); a fully deterministic maximizer would
collapse them.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from math import floor

from .corpus import Word
from .seeds import rng_for


class SplitMethod(str, Enum):
    RANDOM = "random"
    HEURISTIC = "heuristic"
    ADVERSARIAL = "adversarial"


@dataclass(frozen=True)
class Split:
    """A partition of one data set's token multiset into train and test."""

    train: tuple[Word, ...]
    test: tuple[Word, ...]
    method: SplitMethod
    replicate: int


def train_size(n_tokens: int, train_fraction: Fraction | float) -> int:
    """Train-side size under floor rounding (remainder goes to test)."""
    if isinstance(train_fraction, Fraction):
        return int(train_fraction * n_tokens)
    return floor(train_fraction * n_tokens)


def heuristic_split(
    dataset,
    test_fraction: Fraction | float = Fraction(2, 5),
    tolerance: float = 0.05,
    replicate: int = 0,
) -> Split | None:
    """Threshold split on morphs per word, or None if not applicable.

    Test = words with strictly more morphs than the threshold. Among
    qualifying thresholds the one whose test fraction is closest to the
    target wins (smaller threshold on ties). Deterministic, no randomness.
    """
    tokens = tuple(dataset.tokens)
    n = len(tokens)
    if n == 0:
        return None
    target = float(test_fraction)
    counts = [len(w.morphs) for w in tokens]
    best: tuple[float, int] | None = None
    for theta in range(0, max(counts) + 1):
        frac = sum(c > theta for c in counts) / n
        if target - tolerance <= frac <= target + tolerance:
            key = (abs(frac - target), theta)
            if best is None or key < best:
                best = key
    if best is None:
        return None
    theta = best[1]
    train = tuple(w for w in tokens if len(w.morphs) <= theta)
    test = tuple(w for w in tokens if len(w.morphs) > theta)
    return Split(train=train, test=test, method=SplitMethod.HEURISTIC, replicate=replicate)


def adversarial_split(
    dataset,
    test_fraction: Fraction | float = Fraction(2, 5),
    seed: int = 0,
    replicate: int = 0,
) -> Split:
    """Distance-maximizing split on the morphs-per-word statistic.

    Tokens are sorted by the statistic (seeded shuffle breaks ties), the
    sorted order is cut at the test-fraction point, and whichever end gives
    the larger train/test Wasserstein-1 distance becomes the test set.
    """
    from .analysis import wasserstein1

    tokens = list(dataset.tokens)
    n = len(tokens)
    if n < 2:
        raise ValueError("adversarial_split needs at least 2 tokens")
    n_test = n - train_size(n, Fraction(1, 1) - Fraction(test_fraction))
    rng = rng_for(seed, dataset.id, replicate)
    order = rng.permutation(n)
    order = sorted(order, key=lambda i: len(tokens[i].morphs))
    stats = [float(len(tokens[i].morphs)) for i in order]

    low_test, low_train = order[:n_test], order[n_test:]
    high_test, high_train = order[n - n_test:], order[: n - n_test]
    w_low = wasserstein1(stats[:n_test], stats[n_test:])
    w_high = wasserstein1(stats[n - n_test:], stats[: n - n_test])
    if w_high > w_low:
        test_idx, train_idx = high_test, high_train
    elif w_low > w_high:
        test_idx, train_idx = low_test, low_train
    else:
        take_high = bool(rng.integers(0, 2))
        test_idx, train_idx = (high_test, high_train) if take_high else (low_test, low_train)
    return Split(
        train=tuple(tokens[i] for i in sorted(train_idx)),
        test=tuple(tokens[i] for i in sorted(test_idx)),
        method=SplitMethod.ADVERSARIAL,
        replicate=replicate,
    )
