"""Segmenter API and the supervised morph-lexicon baseline.

Every trained model exposes ``segment(surface) -> tuple of morphs`` whose
pieces concatenate back to the surface. The baseline here is a unigram
morph lexicon: known morphs cost their negative log relative frequency,
unknown substrings pay a per-piece boundary penalty plus smoothed
character costs, and decoding is an exact minimum-cost dynamic program
over split points.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from math import log
from typing import Iterable, Protocol, runtime_checkable

from .corpus import Word


@runtime_checkable
class Segmenter(Protocol):
    """What every trained model must provide."""

    def segment(self, surface: str) -> tuple[str, ...]: ...


@dataclass(frozen=True)
class MorphLexicon:
    """Counts learned from segmented training words.

    boundary_penalty (nats) is charged per unknown piece, so splitting
    into unknown fragments is only worth it when the character costs say
    so. char_counts hold raw counts; add-one smoothing with one extra
    unknown-character slot happens at scoring time.
    """

    morph_counts: dict[str, int]
    total_morph_tokens: int
    char_counts: dict[str, int]
    total_char_tokens: int
    max_morph_len: int
    boundary_penalty: float

    def __post_init__(self) -> None:
        if self.total_morph_tokens != sum(self.morph_counts.values()):
            raise ValueError("total_morph_tokens does not match morph_counts")
        if self.total_char_tokens != sum(self.char_counts.values()):
            raise ValueError("total_char_tokens does not match char_counts")
        if self.morph_counts and self.max_morph_len != max(map(len, self.morph_counts)):
            raise ValueError("max_morph_len does not match morph_counts")
        if self.boundary_penalty < 0:
            raise ValueError("boundary_penalty must be nonnegative")

    def char_logprob(self, ch: str) -> float:
        """Add-one smoothed character log probability, with an UNK slot."""
        denom = self.total_char_tokens + len(self.char_counts) + 1
        return log((self.char_counts.get(ch, 0) + 1) / denom)

    def piece_cost(self, piece: str) -> float:
        count = self.morph_counts.get(piece)
        if count is not None:
            return -log(count / self.total_morph_tokens)
        return self.boundary_penalty - sum(self.char_logprob(c) for c in piece)

    def segment(self, surface: str) -> tuple[str, ...]:
        return segment_lexicon(self, surface)


def train_lexicon(train: Iterable[Word], seed: int = 0) -> MorphLexicon:
    """Count morphs and characters; seed is accepted for API uniformity."""
    del seed
    morph_counts: dict[str, int] = {}
    char_counts: dict[str, int] = {}
    for word in train:
        for morph in word.morphs:
            morph_counts[morph] = morph_counts.get(morph, 0) + 1
            for ch in morph:
                char_counts[ch] = char_counts.get(ch, 0) + 1
    if not morph_counts:
        raise ValueError("training multiset is empty")
    total = sum(morph_counts.values())
    return MorphLexicon(
        morph_counts=morph_counts,
        total_morph_tokens=total,
        char_counts=char_counts,
        total_char_tokens=sum(char_counts.values()),
        max_morph_len=max(map(len, morph_counts)),
        boundary_penalty=log(total + 1),
    )


def segment_lexicon(lexicon: MorphLexicon, surface: str) -> tuple[str, ...]:
    """Minimum-cost segmentation by DP over split points.

    Ties go to fewer morphs, then to the leftmost-longest reading (the
    morph-length sequence compared front to back, longer first). Costs of
    a given segmentation accumulate left to right, so equal-cost paths
    compare bit-identically against an exhaustive enumeration using the
    same order.
    """
    n = len(surface)
    if n == 0:
        raise ValueError("cannot segment an empty surface")
    # best[i]: (cost, n_pieces, neg_lengths, morphs) for surface[:i]
    best: list[tuple[float, int, tuple[int, ...], tuple[str, ...]] | None] = [None] * (n + 1)
    best[0] = (0.0, 0, (), ())
    for j in range(1, n + 1):
        for i in range(j):
            prev = best[i]
            if prev is None:
                continue
            piece = surface[i:j]
            cost = prev[0] + lexicon.piece_cost(piece)
            cand = (
                cost,
                prev[1] + 1,
                prev[2] + (-len(piece),),
                prev[3] + (piece,),
            )
            cur = best[j]
            if cur is None or cand[:3] < cur[:3]:
                best[j] = cand
    final = best[n]
    assert final is not None
    return final[3]


# --------------------------------------------------------------------------
# Serialization: header lines, then tab-separated count sections. Section
# markers never contain a tab, entries always do, so parsing is unambiguous.


def save_lexicon(lexicon: MorphLexicon, path) -> None:
    buf = io.StringIO()
    buf.write("segbench-lexicon 1\n")
    buf.write(f"total_morph_tokens {lexicon.total_morph_tokens}\n")
    buf.write(f"total_char_tokens {lexicon.total_char_tokens}\n")
    buf.write(f"max_morph_len {lexicon.max_morph_len}\n")
    buf.write(f"boundary_penalty {lexicon.boundary_penalty!r}\n")
    buf.write("[morphs]\n")
    for morph, count in lexicon.morph_counts.items():
        buf.write(f"{morph}\t{count}\n")
    buf.write("[chars]\n")
    for ch, count in lexicon.char_counts.items():
        buf.write(f"{ch}\t{count}\n")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(buf.getvalue())


def load_lexicon(path) -> MorphLexicon:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "segbench-lexicon 1":
        raise ValueError(f"{path}: not a lexicon file")
    header: dict[str, str] = {}
    idx = 1
    while idx < len(lines) and not lines[idx].startswith("["):
        key, _, value = lines[idx].partition(" ")
        header[key] = value
        idx += 1
    sections: dict[str, dict[str, int]] = {}
    current: dict[str, int] | None = None
    for line in lines[idx:]:
        if line.startswith("[") and "\t" not in line:
            current = {}
            sections[line.strip("[]")] = current
        elif line:
            if current is None:
                raise ValueError(f"{path}: entry before any section")
            key, _, count = line.partition("\t")
            current[key] = int(count)
    return MorphLexicon(
        morph_counts=sections.get("morphs", {}),
        total_morph_tokens=int(header["total_morph_tokens"]),
        char_counts=sections.get("chars", {}),
        total_char_tokens=int(header["total_char_tokens"]),
        max_morph_len=int(header["max_morph_len"]),
        boundary_penalty=float(header["boundary_penalty"]),
    )
