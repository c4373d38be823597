"""Segmentation evaluation: five metrics per word, micro-aggregated per corpus.

Morpheme matching is offset-tagged: a predicted morph counts as correct only
if the same string starts at the same character offset in the gold analysis
(offsets taken within each side's own rebuilt string). This is the strictest
unambiguous reading of morpheme precision/recall and deduplicates repeated
morphs correctly.

Levenshtein distance is computed between canonical serializations in which
morphs are joined by one reserved separator symbol, so a missing or spurious
boundary costs exactly one edit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

SEP = "␟"  # reserved boundary symbol in serializations

METRIC_NAMES = (
    "full_form_accuracy",
    "morpheme_precision",
    "morpheme_recall",
    "morpheme_f1",
    "avg_levenshtein",
)


@dataclass(frozen=True)
class WordEval:
    matched: int
    n_pred: int
    n_gold: int
    exact: bool
    lev: int


@dataclass(frozen=True)
class Evaluation:
    """Corpus-level scores; proportions in [0, 1], distance in characters."""

    full_form_accuracy: float
    morpheme_precision: float
    morpheme_recall: float
    morpheme_f1: float
    avg_levenshtein: float

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}


def levenshtein(a: Sequence, b: Sequence) -> int:
    """Unit-cost insert/delete/substitute edit distance between sequences."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, sa in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, sb in enumerate(b, start=1):
            cur[j] = min(
                prev[j] + 1,
                cur[j - 1] + 1,
                prev[j - 1] + (sa != sb),
            )
        prev = cur
    return prev[len(b)]


def serialize_morphs(morphs: Sequence[str]) -> str:
    """Canonical single-string form used for edit distance."""
    return SEP.join(morphs)


def _instances(morphs: Sequence[str]) -> set[tuple[int, str]]:
    out = set()
    offset = 0
    for m in morphs:
        out.add((offset, m))
        offset += len(m)
    return out


def eval_word(pred: Sequence[str], gold: Sequence[str]) -> WordEval:
    """Score one prediction against gold.

    ``matched`` counts offset-tagged morph instances present on both sides.
    """
    if not pred or not gold:
        raise ValueError("pred and gold morph sequences must be nonempty")
    pred = tuple(pred)
    gold = tuple(gold)
    matched = len(_instances(pred) & _instances(gold))
    return WordEval(
        matched=matched,
        n_pred=len(pred),
        n_gold=len(gold),
        exact=pred == gold,
        lev=levenshtein(serialize_morphs(pred), serialize_morphs(gold)),
    )


def eval_corpus(pairs: Iterable[tuple[Sequence[str], Sequence[str]]]) -> Evaluation:
    """Micro-aggregate (pred, gold) pairs into one Evaluation.

    Precision and recall are count-level across the whole test set, which
    stays stable for very small test sets where per-word averages are noisy.
    """
    matched = n_pred = n_gold = n_exact = n_words = 0
    lev_total = 0
    for pred, gold in pairs:
        we = eval_word(pred, gold)
        matched += we.matched
        n_pred += we.n_pred
        n_gold += we.n_gold
        n_exact += we.exact
        lev_total += we.lev
        n_words += 1
    if n_words == 0:
        raise ValueError("eval_corpus requires at least one (pred, gold) pair")
    precision = matched / n_pred
    recall = matched / n_gold
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return Evaluation(
        full_form_accuracy=n_exact / n_words,
        morpheme_precision=precision,
        morpheme_recall=recall,
        morpheme_f1=f1,
        avg_levenshtein=lev_total / n_words,
    )
